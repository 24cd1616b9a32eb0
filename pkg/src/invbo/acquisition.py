"""Squared-error objective and improvement-based acquisition scores.

For a posterior ``y* ~ N(mu, K)`` and a target ``f0`` the squared error
``|y* - f0|^2`` follows a generalized chi-square law with CDF ``G``.  The
probability of improvement over the incumbent ``L*`` is ``G(L*)`` and the
expected improvement is ``E[max(0, L* - |y* - f0|^2)] = int_0^L* G(t) dt``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gchi2
from .errors import InvalidArgumentError
from .mogp import Posterior


@dataclass(frozen=True, eq=False)
class Target:
    """Desired output vector ``f0``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.array(self.values, dtype=float))
        if v.ndim != 1 or v.size < 1:
            raise InvalidArgumentError("target must be a non-empty vector")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("target has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, Target):
            return NotImplemented
        return np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class Incumbent:
    """Best observed squared error and the input that produced it."""

    best_value: float
    best_input: np.ndarray


def _target_values(target, M=None):
    v = target.values if isinstance(target, Target) else Target(target).values
    if M is not None and v.size != M:
        raise InvalidArgumentError(f"target has length {v.size}, expected {M}")
    return v


def squared_error(y, target) -> float:
    """``sum_m (y_m - f0_m)^2``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    f0 = _target_values(target, y.size)
    d = y - f0
    return float(np.dot(d, d))


def _check_incumbent(value):
    value = float(value)
    if not (np.isfinite(value) and value >= 0):
        raise InvalidArgumentError(f"incumbent value must be finite and >= 0, got {value}")
    return value


def error_law(post: Posterior, target) -> gchi2.GChi2:
    """Generalized chi-square law of ``|y* - f0|^2`` under the posterior."""
    f0 = _target_values(target, post.mean.size)
    return gchi2.from_gaussian_quadratic(post.mean - f0, post.covariance)


def pi_score(post: Posterior, target, incumbent_value, backend=None) -> float:
    """Probability that the squared error does not exceed ``incumbent_value``."""
    L = _check_incumbent(incumbent_value)
    return gchi2.cdf(error_law(post, target), L, backend=backend)


def ei_score(post: Posterior, target, incumbent_value, method="contour", backend=None) -> float:
    """Expected improvement ``int_0^L* G(t) dt`` of the squared error below ``incumbent_value``.

    ``method`` selects how the integral is evaluated, see
    :func:`invbo.gchi2.integrated_cdf`.
    """
    L = _check_incumbent(incumbent_value)
    return gchi2.integrated_cdf(error_law(post, target), L, method=method, backend=backend)


def mean_mse_score(post: Posterior, target) -> float:
    """``-|mu - f0|^2``; larger is better, the covariance is ignored."""
    return -squared_error(post.mean, target)


def argmax_first(scores) -> int:
    """Index of the largest score, ties going to the lowest index."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise InvalidArgumentError("cannot take the argmax of an empty score vector")
    if np.any(np.isnan(scores)):
        raise InvalidArgumentError("scores contain NaN")
    return int(np.argmax(scores))
