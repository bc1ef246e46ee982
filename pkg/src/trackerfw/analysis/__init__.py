"""Firmware analysis: debug-string detection, load-address estimation, fixtures."""
