"""Numerical lab for Fourier frames of measures on the line."""

__version__ = "0.1.0"
