"""Hybrid low-discrepancy point sets with exact and certified star discrepancy."""

__version__ = "0.1.0"
