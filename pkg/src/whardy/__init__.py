"""Numerical toolkit for weighted local Hardy spaces on a periodic grid."""

from ._kernels import BACKEND_NAME
from .grid import Grid, SampledFunction, convolve, delta, lp_norm

__version__ = "0.1.0"

__all__ = ["BACKEND_NAME", "Grid", "SampledFunction", "convolve", "delta", "lp_norm"]
