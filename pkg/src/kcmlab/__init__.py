"""Bootstrap percolation and kinetically constrained model laboratory."""

__version__ = "0.1.0"
