"""Numerical laboratory for invariant-based quantum money and lattice attacks."""

__version__ = "0.1.0"
