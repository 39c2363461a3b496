"""Home health care routing and scheduling toolkit."""

__version__ = "0.1.0"
