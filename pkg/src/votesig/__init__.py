"""Odd-budget majority-voting curves and the signed voting signature."""

__version__ = "0.1.0"
