"""Geodesics on conical manifolds."""
__version__ = "0.1.0"
