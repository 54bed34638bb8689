"""Learning city defence from qualitative battle histories."""

__version__ = "0.1.0"
