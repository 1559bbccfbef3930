"""Logical distances between time series through monotonic parametric specifications."""

__version__ = "0.1.0"
