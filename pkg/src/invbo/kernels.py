"""Input kernel, coregionalization matrix and their Kronecker product.

The joint prior covariance over ``M`` outputs at ``N`` inputs is
``B (x) Kx`` laid out output-major: rows ``m*N .. m*N + N - 1`` hold the
block for output ``m``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class InputKernelParams:
    """Gaussian kernel ``variance * exp(-|x - x'|^2 / (2 lengthscale^2))``."""

    variance: float = 1.0
    lengthscale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise InvalidArgumentError(f"variance must be > 0, got {self.variance}")
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise InvalidArgumentError(f"lengthscale must be > 0, got {self.lengthscale}")


@dataclass(frozen=True, eq=False)
class CoregionalizationParams:
    """Low-rank-plus-diagonal output correlation ``B = L L^T + kappa I``.

    ``factor`` has shape (M, r).
    """

    factor: np.ndarray
    kappa: float = 1.0

    def __post_init__(self):
        factor = np.array(self.factor, dtype=float)
        if factor.ndim == 1:
            factor = factor[:, None]
        if factor.ndim != 2 or factor.shape[0] < 1 or factor.shape[1] < 1:
            raise InvalidArgumentError(f"factor must be (M, r) with r >= 1, got {factor.shape}")
        if not np.all(np.isfinite(factor)):
            raise InvalidArgumentError("factor has non-finite entries")
        if not (np.isfinite(self.kappa) and self.kappa >= 0):
            raise InvalidArgumentError(f"kappa must be >= 0, got {self.kappa}")
        factor.setflags(write=False)
        object.__setattr__(self, "factor", factor)

    @property
    def n_outputs(self) -> int:
        return self.factor.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def __eq__(self, other):
        if not isinstance(other, CoregionalizationParams):
            return NotImplemented
        return self.kappa == other.kappa and np.array_equal(self.factor, other.factor)


def _as_point(x, name):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return x


def _as_inputs(X, name):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidArgumentError(f"{name} must be (N, d), got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return X


def eval_input_kernel(x, x2, p: InputKernelParams) -> float:
    x = _as_point(x, "x")
    x2 = _as_point(x2, "x2")
    if x.shape != x2.shape:
        raise InvalidArgumentError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    d = x - x2
    return float(p.variance * np.exp(-0.5 * np.dot(d, d) / p.lengthscale**2))


def squared_distances(X, X2):
    """Pairwise squared Euclidean distances between rows of X and X2."""
    diff = X[:, None, :] - X2[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def input_kernel_matrix(X, X2, p: InputKernelParams) -> np.ndarray:
    X = _as_inputs(X, "X")
    X2 = _as_inputs(X2, "X2")
    if X.shape[1] != X2.shape[1]:
        raise InvalidArgumentError(
            f"input dimension mismatch: {X.shape[1]} vs {X2.shape[1]}"
        )
    d2 = squared_distances(X, X2)
    return p.variance * np.exp(-0.5 * d2 / p.lengthscale**2)


def coregionalization(p: CoregionalizationParams) -> np.ndarray:
    L = p.factor
    B = L @ L.T
    B = 0.5 * (B + B.T)
    B[np.diag_indices_from(B)] += p.kappa
    return B


def _check_symmetric(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > SYMMETRY_TOL * scale:
        raise InvalidArgumentError(f"{name} is not symmetric")
    return A


def joint_covariance(B, Kx) -> np.ndarray:
    """Dense ``B (x) Kx`` with output-major block ordering."""
    B = _check_symmetric(B, "B")
    Kx = _check_symmetric(Kx, "Kx")
    return np.kron(B, Kx)
