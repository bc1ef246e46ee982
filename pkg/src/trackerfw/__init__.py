"""trackerfw - fitness-tracker firmware update toolkit."""

__version__ = "1.0.0"
