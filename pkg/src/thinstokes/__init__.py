"""Asymptotic and direct solvers for variable-viscosity Stokes flow in thin channels and tube structures."""

__version__ = "0.1.0"
