"""Independent reference implementations used as test oracles.

Everything here is written from the textbook formulas with explicit loops
and explicit inverses, and shares no code with the package.
"""
import math

import numpy as np


def gauss_kernel(a, b, variance, lengthscale):
    a = np.atleast_1d(a)
    b = np.atleast_1d(b)
    s = 0.0
    for u, v in zip(a, b):
        s += (u - v) ** 2
    return variance * math.exp(-s / (2.0 * lengthscale**2))


def kernel_matrix_loop(X, X2, variance, lengthscale):
    K = np.empty((len(X), len(X2)))
    for i in range(len(X)):
        for j in range(len(X2)):
            K[i, j] = gauss_kernel(X[i], X2[j], variance, lengthscale)
    return K


def coreg_loop(L, kappa):
    M, r = L.shape
    B = np.empty((M, M))
    for i in range(M):
        for j in range(M):
            s = 0.0
            for k in range(r):
                s += L[i, k] * L[j, k]
            B[i, j] = s + (kappa if i == j else 0.0)
    return B


def kron_loop(B, Kx):
    M, N = B.shape[0], Kx.shape[0]
    K = np.empty((M * N, M * N))
    for m in range(M):
        for mp in range(M):
            for i in range(N):
                for j in range(N):
                    K[m * N + i, mp * N + j] = B[m, mp] * Kx[i, j]
    return K


def dense_posterior(X, Y, variance, lengthscale, B, noise, xstar, include_noise=True):
    """Posterior of y* at ``xstar`` by explicit-inverse Gaussian conditioning."""
    X = np.atleast_2d(X)
    N, M = Y.shape
    K = kron_loop(B, kernel_matrix_loop(X, X, variance, lengthscale))
    for m in range(M):
        for i in range(N):
            K[m * N + i, m * N + i] += noise[m]
    Kinv = np.linalg.inv(K)
    y = np.concatenate([Y[:, m] for m in range(M)])
    kx = np.array([gauss_kernel(X[i], xstar, variance, lengthscale) for i in range(N)])
    Kstar = np.empty((M * N, M))
    for m in range(M):
        for mp in range(M):
            Kstar[m * N:(m + 1) * N, mp] = B[m, mp] * kx
    mean = Kstar.T @ Kinv @ y
    cov = variance * B - Kstar.T @ Kinv @ Kstar
    if include_noise:
        cov = cov + np.diag(noise)
    return mean, cov


def dense_lml(X, Y, variance, lengthscale, B, noise):
    X = np.atleast_2d(X)
    N, M = Y.shape
    K = kron_loop(B, kernel_matrix_loop(X, X, variance, lengthscale))
    for m in range(M):
        for i in range(N):
            K[m * N + i, m * N + i] += noise[m]
    y = np.concatenate([Y[:, m] for m in range(M)])
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return float(-0.5 * y @ np.linalg.inv(K) @ y - 0.5 * logdet - 0.5 * M * N * math.log(2 * math.pi))


def single_output_gp(X, y, variance, lengthscale, noise, xstar, include_noise=True):
    X = np.atleast_2d(X)
    K = kernel_matrix_loop(X, X, variance, lengthscale) + noise * np.eye(len(X))
    k = np.array([gauss_kernel(x, xstar, variance, lengthscale) for x in X])
    Kinv = np.linalg.inv(K)
    mean = k @ Kinv @ y
    var = variance - k @ Kinv @ k + (noise if include_noise else 0.0)
    return mean, var


def squared_error_draws(mean_shift, cov, n, seed):
    """Draws of |E|^2 with E ~ N(mean_shift, cov)."""
    rng = np.random.default_rng(seed)
    E = rng.multivariate_normal(mean_shift, cov, size=n, method="eigh")
    return np.einsum("ij,ij->i", E, E)


def mc_pi_ei(mean_shift, cov, L, n=10**6, seed=0):
    """Monte Carlo (PI, EI, standard error of EI) of the squared error below ``L``."""
    q = squared_error_draws(mean_shift, cov, n, seed)
    imp = np.maximum(L - q, 0.0)
    return float(np.mean(q <= L)), float(imp.mean()), float(imp.std() / math.sqrt(n))


def weighted_chi2_draws(weights, nc, offset, n, seed):
    rng = np.random.default_rng(seed)
    out = np.full(n, float(offset))
    b = np.sqrt(nc)
    for lam, bb in zip(weights, b):
        out += lam * (rng.standard_normal(n) + bb) ** 2
    return out


def central_chi2_cdf(M, t):
    """Closed forms for 1, 2 and 4 degrees of freedom."""
    if t <= 0:
        return 0.0
    if M == 1:
        return math.erf(math.sqrt(t / 2.0))
    if M == 2:
        return 1.0 - math.exp(-t / 2.0)
    if M == 4:
        return 1.0 - math.exp(-t / 2.0) * (1.0 + t / 2.0)
    raise ValueError(M)


def ncx2_1dof_cdf(b, t):
    """P((z + b)^2 <= t) = Phi(sqrt t - b) - Phi(-sqrt t - b)."""
    def phi(u):
        return 0.5 * math.erfc(-u / math.sqrt(2.0))
    s = math.sqrt(t)
    return phi(s - b) - phi(-s - b)


def central_finite_difference(f, theta, h=1e-6):
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        step = h * max(1.0, abs(theta[i]))
        e[i] = step
        g[i] = (f(theta + e) - f(theta - e)) / (2 * step)
    return g


def random_instance(rng, N, M, d, rank=1):
    X = rng.uniform(-2, 2, size=(N, d))
    Y = rng.normal(size=(N, M))
    variance = float(rng.uniform(0.5, 2.0))
    lengthscale = float(rng.uniform(0.5, 2.0))
    L = rng.normal(size=(M, rank))
    kappa = float(rng.uniform(0.1, 1.0))
    noise = rng.uniform(0.01, 0.2, size=M)
    return X, Y, variance, lengthscale, L, kappa, noise
