"""Perturbative PT-symmetric / position-dependent-mass equivalence toolkit."""

__version__ = "0.1.0"
