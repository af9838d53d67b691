"""Semilinear parabolic equations on cylinders in uniformly local spaces."""
from ._kernels import BACKEND
from .spaces import Field, Grid1D, NormSpec, Weight
from .transverse import TransverseOperator

__version__ = "0.1.0"

__all__ = ["BACKEND", "Field", "Grid1D", "NormSpec", "TransverseOperator", "Weight"]
