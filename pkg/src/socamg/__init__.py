"""Strength-of-connection toolkit for smoothed-aggregation multigrid."""

__version__ = "0.1.0"
