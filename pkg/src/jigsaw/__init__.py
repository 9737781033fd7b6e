"""Jigsaw percolation on lattices and related puzzle graphs."""
__version__ = "0.1.0"
