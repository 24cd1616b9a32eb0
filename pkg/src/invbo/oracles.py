"""Synthetic vector-valued black boxes: a shrinking triangle and a circle.

Both take a scalar input and return the x coordinates of a set of planar
points followed by their y coordinates ("f-block then g-block").
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .mogp import NoiseParams

SPHERE_POINTS = 10
DEFAULT_RANGE = (-5.0, 5.0)
DEFAULT_NOISE_VAR = 1e-4


class OracleKind(enum.Enum):
    TRIANGLE = "triangle"
    SPHERE = "sphere"

    @property
    def output_dim(self) -> int:
        return 12 if self is OracleKind.TRIANGLE else 2 * SPHERE_POINTS


def _scalar(x):
    x = float(np.asarray(x, dtype=float).reshape(-1)[0]) if np.ndim(x) else float(x)
    if not np.isfinite(x):
        raise InvalidArgumentError(f"input must be finite, got {x}")
    return x


def triangle_eval(x) -> np.ndarray:
    """Three vertices and three edge midpoints of a triangle whose size grows with sqrt|x|.

    Returns ``(f_1..f_6, g_1..g_6)``.
    """
    x = _scalar(x)
    s, c, h = 5.0 * np.sin(x), 5.0 * np.cos(x), np.sqrt(abs(x))
    f = [s, s - h, s + h, s - 0.5 * h, s + 0.5 * h, s]
    g = [c, c - 2 * h, c - 2 * h, c - h, c - h, c - 2 * h]
    return np.array(f + g)


def sphere_eval(x) -> np.ndarray:
    """Ten equally spaced points on a circle with center ``5 (sin x, cos x)``
    and radius ``5 |sin x - cos x|``.

    Returns ``(f_1..f_10, g_1..g_10)`` with point ``m`` at angle ``2 m pi / 10``.
    """
    x = _scalar(x)
    c0, c1 = 5.0 * np.sin(x), 5.0 * np.cos(x)
    r = 5.0 * abs(np.sin(x) - np.cos(x))
    ang = 2.0 * np.pi * np.arange(1, SPHERE_POINTS + 1) / SPHERE_POINTS
    return np.concatenate([c0 + r * np.cos(ang), c1 + r * np.sin(ang)])


_EVAL = {OracleKind.TRIANGLE: triangle_eval, OracleKind.SPHERE: sphere_eval}


@dataclass(frozen=True)
class SyntheticOracle:
    """One of the synthetic problems, optionally with Gaussian observation noise."""

    kind: OracleKind
    noise: NoiseParams | None = None

    def __post_init__(self):
        kind = OracleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.noise is not None and self.noise.variances.size != kind.output_dim:
            raise InvalidArgumentError(
                f"{kind.value} needs {kind.output_dim} noise variances, "
                f"got {self.noise.variances.size}"
            )

    @classmethod
    def with_noise(cls, kind, variance=DEFAULT_NOISE_VAR):
        kind = OracleKind(kind)
        if variance is None or variance == 0:
            return cls(kind, None)
        return cls(kind, NoiseParams(np.full(kind.output_dim, float(variance))))

    @property
    def output_dim(self) -> int:
        return self.kind.output_dim

    def evaluate(self, x) -> np.ndarray:
        """Noise-free output."""
        return _EVAL[self.kind](x)


def observe(oracle: SyntheticOracle, x, rng: np.random.Generator | None = None) -> np.ndarray:
    """Noisy observation ``f(x) + eps`` with ``eps_m ~ N(0, sigma_m^2)``.

    Without noise the exact value is returned and ``rng`` is not touched.
    """
    y = oracle.evaluate(x)
    if oracle.noise is None:
        return y
    if rng is None:
        raise InvalidArgumentError("a noisy oracle needs a random generator")
    return y + np.sqrt(oracle.noise.variances) * rng.standard_normal(y.size)


def generate_pool(kind, count: int, input_range=DEFAULT_RANGE, seed=None) -> np.ndarray:
    """``count`` inputs drawn uniformly on ``input_range``, sorted, as a (count, 1) matrix.

    ``kind`` is accepted for symmetry with the other oracle helpers; every
    synthetic problem has a scalar input.
    """
    OracleKind(kind)
    lo, hi = (float(v) for v in input_range)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise InvalidArgumentError(f"invalid input range [{lo}, {hi}]")
    if int(count) != count or count < 1:
        raise InvalidArgumentError(f"count must be a positive integer, got {count}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.uniform(lo, hi, int(count)))[:, None]
