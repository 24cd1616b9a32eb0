"""Bayesian active learning for structured-output inverse problems.

Find the input whose vector output matches a target, using a multi-output
Gaussian process surrogate and acquisition functions built on the
generalized chi-squared law of the squared error.
"""
from ._backend import COMPILED
from .errors import DataError, InvalidArgumentError, NumericalError
from .gchi2 import GChi2, cdf, integrated_cdf

__all__ = [
    "COMPILED",
    "DataError",
    "GChi2",
    "InvalidArgumentError",
    "NumericalError",
    "cdf",
    "integrated_cdf",
]

__version__ = "0.1.0"
