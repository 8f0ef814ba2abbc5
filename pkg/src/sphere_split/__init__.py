"""Splitting tessellations and Poisson great hypersphere tessellations of S^d."""

__version__ = "0.1.0"
