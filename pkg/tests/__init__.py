"""Test suite for the trackerfw firmware toolkit."""
