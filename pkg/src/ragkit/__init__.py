"""Robust action-governor toolkit for uncertain piecewise-affine systems."""

__version__ = "0.1.0"
