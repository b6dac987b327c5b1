"""Numerical laboratory for fractional Hardy inequalities off fractal d-sets."""

__version__ = "0.1.0"
