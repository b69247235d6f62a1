"""Predict illegal fishing vessel-days from AIS positions and ocean seascapes."""

__version__ = "0.1.0"
