"""Flat Hessian metrics in two dimensions: verification and construction."""
__version__ = "0.1.0"
