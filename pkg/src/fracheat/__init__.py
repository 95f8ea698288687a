"""Numerical laboratory for the time-fractional semilinear heat equation."""
__version__ = "0.1.0"
