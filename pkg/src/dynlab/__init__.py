"""Desk-scale laboratory for flat volume-preserving perturbations of suspension flows."""

__version__ = "0.1.0"
