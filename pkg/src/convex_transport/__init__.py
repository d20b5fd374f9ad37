"""Numerical verification of transport inequalities for kappa-concave measures."""

__version__ = "0.1.0"
