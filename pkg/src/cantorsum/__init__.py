"""Numerical laboratory for arithmetic sums of regular Cantor sets."""

__version__ = "0.1.0"
