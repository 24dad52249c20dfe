"""Measurement and attention-flow forecasting for dynamic recommendation networks."""

__version__ = "0.1.0"
