"""Multi-output GP regression with an ICM covariance ``B (x) Kx + Sigma (x) I``.

Hyperparameters are the Gaussian input kernel (variance, lengthscale), the
coregionalization factor ``L`` and inflation ``kappa`` with
``B = L L^T + kappa I``, and one noise variance per output.

Linear algebra goes through the Kronecker structure.  With
``D = diag(sigma)^-1`` and eigendecompositions ``D B D = U_B S_B U_B^T``
and ``Kx = U_K S_K U_K^T``::

    (B (x) Kx + Sigma (x) I)^-1 = (D U_B (x) U_K) (S_B (x) S_K + I)^-1 (U_B^T D (x) U_K^T)

so the marginal likelihood, its gradient and the predictive moments cost
``O(M^3 + N^3)`` instead of ``O(M^3 N^3)``.  A dense Cholesky route with a
jitter ladder is kept for cross-checks (:func:`dense_log_marginal_likelihood`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize

from .errors import InvalidArgumentError, NumericalError
from .kernels import (
    CoregionalizationParams,
    InputKernelParams,
    coregionalization,
    input_kernel_matrix,
    joint_covariance,
    squared_distances,
)

logger = logging.getLogger(__name__)

NOISE_FLOOR = 1e-8
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs ``X`` (N, d) with noisy structured outputs ``Y`` (N, M)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[None, :] if X.shape[0] == 1 else Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise InvalidArgumentError("X and Y must be 2-d")
        if X.shape[0] != Y.shape[0]:
            raise InvalidArgumentError(
                f"X has {X.shape[0]} rows but Y has {Y.shape[0]}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidArgumentError("dataset has non-finite entries")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def empty(cls, d, M):
        return cls(np.empty((0, d)), np.empty((0, M)))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    @property
    def output_dim(self) -> int:
        return self.Y.shape[1]

    def append(self, x, y) -> "Dataset":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape != (self.input_dim,) or y.shape != (self.output_dim,):
            raise InvalidArgumentError(
                f"expected x of length {self.input_dim} and y of length "
                f"{self.output_dim}, got {x.shape} and {y.shape}"
            )
        return Dataset(np.vstack([self.X, x]), np.vstack([self.Y, y]))


@dataclass(frozen=True, eq=False)
class NoiseParams:
    """Per-output Gaussian noise variances, floored at ``NOISE_FLOOR``."""

    variances: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.array(self.variances, dtype=float))
        if v.ndim != 1 or v.size < 1:
            raise InvalidArgumentError("noise variances must be a non-empty vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidArgumentError("noise variances must be finite and >= 0")
        v = np.maximum(v, NOISE_FLOOR)
        v.setflags(write=False)
        object.__setattr__(self, "variances", v)

    def __eq__(self, other):
        if not isinstance(other, NoiseParams):
            return NotImplemented
        return np.array_equal(self.variances, other.variances)


@dataclass(frozen=True)
class Hyperparams:
    kernel: InputKernelParams
    coreg: CoregionalizationParams
    noise: NoiseParams

    def __post_init__(self):
        if self.coreg.n_outputs != self.noise.variances.size:
            raise InvalidArgumentError(
                f"coregionalization has {self.coreg.n_outputs} outputs but "
                f"noise has {self.noise.variances.size}"
            )

    @property
    def n_outputs(self) -> int:
        return self.coreg.n_outputs

    @classmethod
    def default(cls, dataset: Dataset, rank: int = 1) -> "Hyperparams":
        """Data-scaled starting point, deterministic in the data."""
        M = dataset.output_dim
        y2 = _output_scale(dataset)
        return cls(
            InputKernelParams(1.0, _input_spread(dataset)),
            CoregionalizationParams(np.full((M, rank), np.sqrt(0.5 * y2) / np.sqrt(rank)), 0.5 * y2),
            NoiseParams(np.full(M, 1e-2 * y2)),
        )

    def to_dict(self) -> dict:
        return {
            "variance": self.kernel.variance,
            "lengthscale": self.kernel.lengthscale,
            "factor": self.coreg.factor.tolist(),
            "kappa": self.coreg.kappa,
            "noise": self.noise.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(
            InputKernelParams(float(d["variance"]), float(d["lengthscale"])),
            CoregionalizationParams(np.asarray(d["factor"], dtype=float), float(d["kappa"])),
            NoiseParams(np.asarray(d["noise"], dtype=float)),
        )


def _output_scale(dataset):
    if dataset.n == 0:
        return 1.0
    s = float(np.mean(dataset.Y**2))
    return s if s > 0 else 1.0


def _input_spread(dataset):
    if dataset.n < 2:
        return 1.0
    s = float(np.mean(np.std(dataset.X, axis=0)))
    return s if s > 0 else 1.0


# ---------------------------------------------------------------------------
# factorization


def cholesky_with_jitter(A, min_rel=1e-10, max_rel=1e-4):
    """Lower Cholesky factor of ``A``, adding a growing diagonal jitter.

    Jitter starts at ``min_rel * mean(diag(A))`` and grows by 10x up to
    ``max_rel * mean(diag(A))``.  Returns ``(L, jitter)``.
    """
    A = np.asarray(A, dtype=float)
    try:
        return linalg.cholesky(A, lower=True), 0.0
    except linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(A))) if A.size else 1.0
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    jitter = min_rel * scale
    while jitter <= max_rel * scale * (1 + 1e-9):
        try:
            L = linalg.cholesky(A + jitter * np.eye(A.shape[0]), lower=True)
            logger.debug("cholesky needed jitter %.3g", jitter)
            return L, jitter
        except linalg.LinAlgError:
            jitter *= 10.0
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    raise NumericalError(
        f"matrix not positive definite after jitter {max_rel * scale:.3g}; "
        f"smallest eigenvalue {w[0]:.3g}",
        bound=float(w[0]),
    )


@dataclass(frozen=True, eq=False)
class _KronFactor:
    sigma2: np.ndarray  # (M,)
    s_B: np.ndarray  # (M,) eigenvalues of D B D
    U_B: np.ndarray
    s_K: np.ndarray  # (N,) eigenvalues of Kx
    U_K: np.ndarray
    G: np.ndarray  # U_B^T D
    den: np.ndarray  # (M, N) = s_B s_K^T + 1
    Z: np.ndarray  # G Y^T U_K
    alpha: np.ndarray  # (M, N), (K + Sigma)^-1 y reshaped output-major


def _eigh_psd(A, name):
    A = 0.5 * (A + A.T)
    try:
        s, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of {name} failed: {exc}") from exc
    if not np.all(np.isfinite(s)):
        raise NumericalError(f"{name} has non-finite eigenvalues")
    scale = max(float(np.max(np.abs(s))), 1e-300) if s.size else 1.0
    if s.size and s[0] < -1e-6 * scale:
        raise NumericalError(
            f"{name} is indefinite; smallest eigenvalue {s[0]:.3g}", bound=float(s[0])
        )
    return np.maximum(s, 0.0), U


def _kron_factor(B, Kx, sigma2, Y) -> _KronFactor:
    dinv = 1.0 / np.sqrt(sigma2)
    s_B, U_B = _eigh_psd(dinv[:, None] * B * dinv[None, :], "scaled B")
    s_K, U_K = _eigh_psd(Kx, "Kx")
    G = U_B.T * dinv[None, :]
    den = s_B[:, None] * s_K[None, :] + 1.0
    Z = G @ Y.T @ U_K
    alpha = G.T @ (Z / den) @ U_K.T
    return _KronFactor(sigma2, s_B, U_B, s_K, U_K, G, den, Z, alpha)


@dataclass(frozen=True, eq=False)
class FittedModel:
    """A dataset conditioned on fixed hyperparameters.

    Build with :meth:`condition`; the factorization is computed once and
    the object is immutable afterwards.
    """

    dataset: Dataset
    hyperparams: Hyperparams
    B: np.ndarray
    Kx: np.ndarray
    factor: _KronFactor | None
    fit_info: dict = field(default_factory=dict)

    @classmethod
    def condition(cls, dataset: Dataset, hyperparams: Hyperparams, fit_info=None):
        if dataset.output_dim != hyperparams.n_outputs:
            raise InvalidArgumentError(
                f"dataset has {dataset.output_dim} outputs, hyperparameters "
                f"{hyperparams.n_outputs}"
            )
        B = coregionalization(hyperparams.coreg)
        if dataset.n == 0:
            return cls(dataset, hyperparams, B, np.empty((0, 0)), None, dict(fit_info or {}))
        Kx = input_kernel_matrix(dataset.X, dataset.X, hyperparams.kernel)
        fac = _kron_factor(B, Kx, hyperparams.noise.variances, dataset.Y)
        return cls(dataset, hyperparams, B, Kx, fac, dict(fit_info or {}))

    @property
    def n_outputs(self) -> int:
        return self.hyperparams.n_outputs


@dataclass(frozen=True, eq=False)
class Posterior:
    mean: np.ndarray
    covariance: np.ndarray
    includes_noise: bool = True


# ---------------------------------------------------------------------------
# likelihood


def log_marginal_likelihood(model: FittedModel) -> float:
    """``log N(vec(Y) | 0, B (x) Kx + Sigma (x) I)`` with ``vec`` output-major."""
    if model.dataset.n < 1:
        raise InvalidArgumentError("log marginal likelihood needs at least one observation")
    f = model.factor
    N = model.dataset.n
    M = model.n_outputs
    quad = float(np.sum(f.Z**2 / f.den))
    logdet = N * float(np.sum(np.log(f.sigma2))) + float(np.sum(np.log(f.den)))
    return -0.5 * quad - 0.5 * logdet - 0.5 * M * N * LOG_2PI


def dense_log_marginal_likelihood(dataset: Dataset, hyperparams: Hyperparams) -> float:
    """Same quantity through the dense joint covariance and a jittered Cholesky."""
    B = coregionalization(hyperparams.coreg)
    Kx = input_kernel_matrix(dataset.X, dataset.X, hyperparams.kernel)
    N = dataset.n
    C = joint_covariance(B, Kx) + np.kron(np.diag(hyperparams.noise.variances), np.eye(N))
    y = dataset.Y.T.reshape(-1)
    L, _ = cholesky_with_jitter(C)
    a = linalg.cho_solve((L, True), y)
    return float(-0.5 * y @ a - np.sum(np.log(np.diag(L))) - 0.5 * y.size * LOG_2PI)


class _Layout:
    """Packing of hyperparameters into an unconstrained-ish vector.

    Order: log variance, log lengthscale, log kappa, log noise (M, unless
    fixed), factor entries (M * r, row-major).
    """

    def __init__(self, M, rank, fixed_noise):
        self.M = M
        self.rank = rank
        self.fixed_noise = fixed_noise
        self.n_noise = 0 if fixed_noise else M
        self.size = 3 + self.n_noise + M * rank

    def pack(self, hp: Hyperparams, log_lo):
        kappa = max(hp.coreg.kappa, np.exp(log_lo))
        parts = [
            [np.log(hp.kernel.variance), np.log(hp.kernel.lengthscale), np.log(kappa)],
        ]
        if not self.fixed_noise:
            parts.append(np.log(hp.noise.variances))
        parts.append(hp.coreg.factor.ravel())
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def unpack(self, theta, noise: NoiseParams):
        variance, lengthscale, kappa = np.exp(theta[:3])
        k = 3
        if not self.fixed_noise:
            noise = NoiseParams(np.exp(theta[k : k + self.M]))
            k += self.M
        factor = theta[k:].reshape(self.M, self.rank)
        return Hyperparams(
            InputKernelParams(float(variance), float(lengthscale)),
            CoregionalizationParams(factor, float(kappa)),
            noise,
        )

    def bounds(self, log_lo, log_hi):
        b = [(log_lo, log_hi)] * (3 + self.n_noise)
        b += [(None, None)] * (self.M * self.rank)
        return b


def _lml_raw(variance, lengthscale, factor, kappa, sigma2, d2, Y, fixed_noise, want_grad=True):
    M = factor.shape[0]
    N = Y.shape[0]
    B = factor @ factor.T
    B[np.diag_indices(M)] += kappa
    E = np.exp(-0.5 * d2 / lengthscale**2)
    Kx = variance * E
    f = _kron_factor(B, Kx, sigma2, Y)
    quad = float(np.sum(f.Z**2 / f.den))
    logdet = N * float(np.sum(np.log(sigma2))) + float(np.sum(np.log(f.den)))
    value = -0.5 * quad - 0.5 * logdet - 0.5 * M * N * LOG_2PI
    if not want_grad:
        return value, None
    Kx_c = (f.U_K * f.s_K) @ f.U_K.T
    A = f.alpha

    wB = np.sum(f.s_K[None, :] / f.den, axis=1)
    W_B = 0.5 * (A @ Kx_c @ A.T) - 0.5 * (f.G.T * wB) @ f.G
    W_B = 0.5 * (W_B + W_B.T)
    g_L = 2.0 * W_B @ factor
    g_logkappa = float(np.trace(W_B)) * kappa

    q = np.sum(f.s_B[:, None] / f.den, axis=0)
    W_K = 0.5 * (A.T @ B @ A) - 0.5 * (f.U_K * q) @ f.U_K.T
    g_logvar = float(np.sum(W_K * Kx_c))
    g_logell = float(np.sum(W_K * Kx * d2)) / lengthscale**2

    parts = [[g_logvar, g_logell, g_logkappa]]
    if not fixed_noise:
        z = np.sum(1.0 / f.den, axis=1)
        g_noise = 0.5 * np.sum(A**2, axis=1) - 0.5 * (f.G**2).T @ z
        parts.append(g_noise * sigma2)
    parts.append(g_L.ravel())
    return value, np.concatenate([np.asarray(p, dtype=float) for p in parts])


def lml_and_grad(dataset: Dataset, hyperparams: Hyperparams, fixed_noise=False):
    """Log marginal likelihood and its gradient in the packed log-space layout.

    Gradient entries follow ``_Layout``: d/dlog(variance), d/dlog(lengthscale),
    d/dlog(kappa), d/dlog(noise_m) (omitted when ``fixed_noise``), d/dL.
    """
    if dataset.n < 1:
        raise InvalidArgumentError("log marginal likelihood needs at least one observation")
    hp = hyperparams
    d2 = squared_distances(dataset.X, dataset.X)
    return _lml_raw(
        hp.kernel.variance, hp.kernel.lengthscale, np.array(hp.coreg.factor),
        hp.coreg.kappa, hp.noise.variances, d2, dataset.Y, fixed_noise,
    )


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class FitOptions:
    """Settings for marginal-likelihood maximization.

    Positive hyperparameters are searched in natural-log space within
    ``[log10_bounds[0], log10_bounds[1]] * ln(10)``.  Starts beyond the
    first (the supplied init) are drawn from ``seed``.
    """

    n_starts: int = 5
    log10_bounds: tuple = (-6.0, 6.0)
    maxiter: int = 200
    fixed_noise: bool = False
    seed: int = 0

    def replace(self, **kw):
        return replace(self, **kw)


def _random_start(rng, dataset, init: Hyperparams, layout: _Layout, log_lo, log_hi):
    y2 = _output_scale(dataset)
    spread = _input_spread(dataset)
    M, r = layout.M, layout.rank
    parts = [
        [
            rng.uniform(np.log(0.1), np.log(10.0)),
            np.log(spread) + rng.uniform(np.log(0.1), np.log(10.0)),
            np.log(y2) + rng.uniform(np.log(1e-3), np.log(1.0)),
        ]
    ]
    if not layout.fixed_noise:
        parts.append(np.log(y2) + rng.uniform(np.log(1e-6), np.log(1e-1), size=M))
    parts.append(rng.normal(0.0, np.sqrt(y2 / r), size=M * r))
    theta = np.concatenate([np.asarray(p, dtype=float) for p in parts])
    n_pos = 3 + layout.n_noise
    theta[:n_pos] = np.clip(theta[:n_pos], log_lo, log_hi)
    return theta


def fit(dataset: Dataset, init: Hyperparams | None = None, opts: FitOptions | None = None) -> FittedModel:
    """Maximize the log marginal likelihood from ``init`` plus random restarts.

    The returned model's objective is never below the objective at ``init``
    (the init itself is a candidate).  Raises :class:`NumericalError` if no
    start can be evaluated.
    """
    opts = opts or FitOptions()
    if dataset.n < 1:
        raise InvalidArgumentError("fit needs at least one observation")
    if init is None:
        init = Hyperparams.default(dataset)
    layout = _Layout(dataset.output_dim, init.coreg.rank, opts.fixed_noise)
    log_lo, log_hi = (b * np.log(10.0) for b in opts.log10_bounds)
    bounds = layout.bounds(log_lo, log_hi)

    d2 = squared_distances(dataset.X, dataset.X)
    M, r = layout.M, layout.rank
    fixed_sigma2 = init.noise.variances

    def objective(theta):
        variance, lengthscale, kappa = np.exp(theta[:3])
        k = 3
        if opts.fixed_noise:
            sigma2 = fixed_sigma2
        else:
            sigma2 = np.maximum(np.exp(theta[k : k + M]), NOISE_FLOOR)
            k += M
        factor = theta[k:].reshape(M, r)
        try:
            with np.errstate(all="raise"):
                v, g = _lml_raw(variance, lengthscale, factor, kappa, sigma2, d2,
                                dataset.Y, opts.fixed_noise)
        except (NumericalError, FloatingPointError, np.linalg.LinAlgError):
            return 1e300, np.zeros_like(theta)
        if not np.isfinite(v) or not np.all(np.isfinite(g)):
            return 1e300, np.zeros_like(theta)
        return -v, -g

    best_hp = init
    try:
        init_value = log_marginal_likelihood(FittedModel.condition(dataset, init))
    except NumericalError:
        init_value = -np.inf
    best_value = init_value
    rng = np.random.default_rng(opts.seed)
    starts = [np.clip(layout.pack(init, log_lo), [b[0] if b[0] is not None else -np.inf for b in bounds],
                      [b[1] if b[1] is not None else np.inf for b in bounds])]
    starts += [_random_start(rng, dataset, init, layout, log_lo, log_hi) for _ in range(opts.n_starts - 1)]
    nfev = 0
    for theta0 in starts:
        res = optimize.minimize(
            objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": opts.maxiter},
        )
        nfev += res.nfev
        if res.fun >= 1e299:
            continue
        value = -float(res.fun)
        if value > best_value:
            best_value = value
            best_hp = layout.unpack(res.x, init.noise)
    if not np.isfinite(best_value):
        raise NumericalError("marginal likelihood could not be evaluated from any start")
    model = FittedModel.condition(dataset, best_hp)
    # score the winner on the same code path as the init so the comparison is exact
    final_value = log_marginal_likelihood(model) if best_hp is not init else init_value
    if final_value < init_value:
        best_hp, model, final_value = init, FittedModel.condition(dataset, init), init_value
    model.fit_info.update(
        {"log_likelihood": final_value, "init_log_likelihood": init_value, "nfev": nfev}
    )
    return model


# ---------------------------------------------------------------------------
# prediction


def predict_batch(model: FittedModel, Xstar, include_noise=True):
    """Predictive means (P, M) and covariances (P, M, M) at the rows of ``Xstar``."""
    Xstar = np.asarray(Xstar, dtype=float)
    if Xstar.ndim == 1:
        Xstar = Xstar[:, None]
    d = model.dataset.input_dim
    if Xstar.ndim != 2 or Xstar.shape[1] != d:
        raise InvalidArgumentError(f"test inputs must be (P, {d}), got {Xstar.shape}")
    P = Xstar.shape[0]
    M = model.n_outputs
    B = model.B
    kss = model.hyperparams.kernel.variance
    if model.factor is None:
        mean = np.zeros((P, M))
        cov = np.broadcast_to(kss * B, (P, M, M)).copy()
    else:
        f = model.factor
        kstar = input_kernel_matrix(model.dataset.X, Xstar, model.hyperparams.kernel)
        mean = (B @ f.alpha @ kstar).T
        V = f.U_K.T @ kstar
        W = (V**2).T @ (1.0 / f.den).T
        # the latent covariance is D^1/2 U_B diag(s_B (kss - s_B W)) U_B^T D^1/2;
        # clipping the diagonal removes cancellation error without touching real mass
        diag = np.maximum(f.s_B[None, :] * (kss - f.s_B[None, :] * W), 0.0)
        H = np.sqrt(f.sigma2)[:, None] * f.U_B
        cov = np.einsum("ma,pa,na->pmn", H, diag, H)
        cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    if include_noise:
        idx = np.arange(M)
        cov[:, idx, idx] += model.hyperparams.noise.variances
    return mean, cov


def predict(model: FittedModel, x_star, include_noise=True) -> Posterior:
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if x_star.ndim != 1 or x_star.size != model.dataset.input_dim:
        raise InvalidArgumentError(
            f"x_star must have length {model.dataset.input_dim}, got shape {x_star.shape}"
        )
    mean, cov = predict_batch(model, x_star[None, :], include_noise=include_noise)
    return Posterior(mean[0], cov[0], include_noise)
