"""Fundamental limits and estimators for the groupwise heteroskedastic spiked matrix model."""
__version__ = "0.1.0"
