"""Numerical laboratory for a relativistic perfect fluid coupled to scalar gravity."""

__version__ = "0.1.0"
