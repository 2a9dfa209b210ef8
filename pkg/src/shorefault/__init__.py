"""Time-domain fault studies of high-voltage shore connections."""

__version__ = "0.1.0"
