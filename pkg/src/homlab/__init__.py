"""Numerical laboratory for shear-layer velocity hierarchies."""
