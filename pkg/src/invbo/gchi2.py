"""Generalized chi-square law of a Gaussian squared norm.

``W = delta + sum_i lam_i (z_i + b_i)^2`` with ``z`` standard normal.  This
is the law of ``|E|^2`` for ``E ~ N(m, S)``: diagonalize ``S = Q diag(lam) Q^T``
and set ``b = Q^T m / sqrt(lam)``.  Directions whose eigenvalue is
negligible carry no randomness and add ``(Q^T m)_i^2`` to ``delta``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InvalidArgumentError, NumericalError

EIG_REL_THRESHOLD = 1e-10
NEG_EIG_TOL = 1e-8
SYMMETRY_TOL = 1e-9
DELTA_SNAP = 1e-12
CDF_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GChi2:
    """Weights (sorted descending), noncentralities ``b_i^2`` and offset ``delta``."""

    weights: np.ndarray
    noncentrality: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.weights, dtype=float)).ravel()
        nc = np.atleast_1d(np.asarray(self.noncentrality, dtype=float)).ravel()
        if lam.shape != nc.shape:
            raise InvalidArgumentError(
                f"weights and noncentrality differ in length: {lam.size} vs {nc.size}"
            )
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(nc))):
            raise InvalidArgumentError("non-finite weights or noncentralities")
        if np.any(lam < 0) or np.any(nc < 0):
            raise InvalidArgumentError("weights and noncentralities must be >= 0")
        offset = float(self.offset)
        if not (np.isfinite(offset) and offset >= 0):
            raise InvalidArgumentError(f"offset must be finite and >= 0, got {offset}")
        # zero-weight terms are identically zero
        keep = lam > 0
        lam, nc = lam[keep], nc[keep]
        order = np.argsort(-lam, kind="stable")
        lam, nc = lam[order], nc[order]
        lam.setflags(write=False)
        nc.setflags(write=False)
        object.__setattr__(self, "weights", lam)
        object.__setattr__(self, "noncentrality", nc)
        object.__setattr__(self, "offset", offset)

    @property
    def is_point_mass(self) -> bool:
        return self.weights.size == 0

    def mean(self) -> float:
        return self.offset + float(np.sum(self.weights * (1.0 + self.noncentrality)))

    def variance(self) -> float:
        lam, nc = self.weights, self.noncentrality
        return float(np.sum(2.0 * lam**2 * (1.0 + 2.0 * nc)))

    def scaled(self, c: float) -> "GChi2":
        """Law of ``c W`` for ``c > 0``."""
        if not (np.isfinite(c) and c > 0):
            raise InvalidArgumentError(f"scale must be > 0, got {c}")
        return GChi2(c * self.weights, self.noncentrality, c * self.offset)

    def __eq__(self, other):
        if not isinstance(other, GChi2):
            return NotImplemented
        return (
            self.offset == other.offset
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.noncentrality, other.noncentrality)
        )

    def __repr__(self):
        return (
            f"GChi2(weights={self.weights.tolist()}, "
            f"noncentrality={self.noncentrality.tolist()}, offset={self.offset})"
        )


def from_gaussian_quadratic(mean_shift, covariance) -> GChi2:
    """Law of ``|E|^2`` for ``E ~ N(mean_shift, covariance)``.

    Raises
    ------
    InvalidArgumentError
        Shape mismatch, non-finite entries or an asymmetric covariance.
    NumericalError
        The covariance has an eigenvalue below ``-1e-8`` (relative to its scale).
    """
    m = np.atleast_1d(np.asarray(mean_shift, dtype=float))
    S = np.atleast_2d(np.asarray(covariance, dtype=float))
    if m.ndim != 1 or S.shape != (m.size, m.size):
        raise InvalidArgumentError(
            f"need an M-vector and an MxM matrix, got {m.shape} and {S.shape}"
        )
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(S))):
        raise InvalidArgumentError("non-finite mean shift or covariance")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > SYMMETRY_TOL * scale:
        raise InvalidArgumentError("covariance is not symmetric")
    lam, Q = np.linalg.eigh(0.5 * (S + S.T))
    lam_max = float(lam.max()) if lam.size else 0.0
    if lam.size and lam.min() < -NEG_EIG_TOL * max(1.0, lam_max):
        raise NumericalError(
            f"covariance has a negative eigenvalue {lam.min():.3e}", bound=float(lam.min())
        )
    proj2 = (Q.T @ m) ** 2
    live = lam > EIG_REL_THRESHOLD * lam_max if lam_max > 0 else np.zeros(lam.shape, bool)
    offset = float(np.sum(proj2[~live]))
    return GChi2(lam[live], proj2[live] / lam[live], offset)


def _check_status(status, bound, what):
    if status:
        reasons = {
            1: "truncation bound not reached",
            2: "quadrature panel limit reached",
            3: "evaluation budget exhausted",
            4: "saddle point not found",
        }
        raise NumericalError(f"{what}: {reasons.get(status, 'failed')}", bound=bound)


def cdf_with_error(dist: GChi2, t: float, tol: float = CDF_TOL, backend=None):
    """``(P(W <= t), absolute error bound)``."""
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise InvalidArgumentError(f"t must be finite and >= 0, got {t}")
    if dist.is_point_mass:
        return (1.0 if t >= dist.offset - DELTA_SNAP else 0.0), 0.0
    x = t - dist.offset
    if x <= DELTA_SNAP:
        return 0.0, 0.0
    kernel = _backend.get(backend)
    value, err, status, _ = kernel.cdf_weighted(dist.weights, dist.noncentrality, x, tol)
    _check_status(status, err, "CDF inversion")
    return min(1.0, max(0.0, value)), err


def cdf(dist: GChi2, t: float, tol: float = CDF_TOL, backend=None) -> float:
    """P(W <= t) by inversion of the characteristic function.

    Returns 0 for ``t`` at or below the offset (the left limit), except for a
    pure point mass, which jumps to 1 at its offset.
    """
    return cdf_with_error(dist, t, tol, backend)[0]


def integrated_cdf(dist: GChi2, upper: float, method: str = "contour", rtol: float = 1e-6,
                   atol: float = 1e-12, max_evals: int = 2**14, backend=None) -> float:
    """``int_0^upper P(W <= t) dt``, which equals ``E[max(0, upper - W)]``.

    ``method="contour"`` inverts the transform of the integrated CDF directly;
    ``method="simpson"`` runs adaptive Simpson over CDF values with relative
    tolerance ``rtol`` and at most ``max_evals`` CDF evaluations.
    """
    if method not in ("contour", "simpson"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    upper = float(upper)
    if not np.isfinite(upper) or upper < 0:
        raise InvalidArgumentError(f"upper limit must be finite and >= 0, got {upper}")
    X = upper - dist.offset
    if X <= DELTA_SNAP:
        return 0.0
    if dist.is_point_mass:
        return X
    kernel = _backend.get(backend)
    if method == "contour":
        tol = max(atol, 1e-3 * rtol * min(X, dist.mean() - dist.offset))
        value, err, status, _ = kernel.ei_contour(dist.weights, dist.noncentrality, X, tol)
        _check_status(status, err, "integrated CDF inversion")
    else:
        value, err, status, _ = kernel.ei_simpson(
            dist.weights, dist.noncentrality, X, rtol, atol, max_evals, CDF_TOL * 0.1
        )
        _check_status(status, err, "adaptive Simpson")
    return min(upper, max(0.0, value))


def sample(dist: GChi2, n: int, seed=None) -> np.ndarray:
    """``n`` i.i.d. draws of ``delta + sum lam_i (z_i + b_i)^2``."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n}")
    n = int(n)
    if dist.is_point_mass:
        return np.full(n, dist.offset)
    rng = np.random.default_rng(seed)
    b = np.sqrt(dist.noncentrality)
    out = np.full(n, dist.offset)
    # chunked to bound memory for large n
    chunk = max(1, 2**22 // dist.weights.size)
    for s in range(0, n, chunk):
        z = rng.standard_normal((min(chunk, n - s), dist.weights.size))
        out[s:s + z.shape[0]] += ((z + b) ** 2) @ dist.weights
    return out
