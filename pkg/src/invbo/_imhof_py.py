"""Pure-Python CDF and partial-expectation kernels for positive quadratic forms.

Reference implementation of the compiled ``_imhof`` extension: same
algorithm, same status codes, numpy-vectorized per quadrature panel.

For ``Q = sum_j lam_j (z_j + b_j)^2`` with cumulant generating function
``K(t) = sum_j -log(w_j)/2 + nc_j (1/w_j - 1)/2`` where ``w_j = 1 - 2 lam_j t``,
Imhof's inversion integral is taken along a path that crosses the real
axis at the saddle point of ``K(t) - t x`` and rises vertically (each factor
of the characteristic function is largest on the real axis, so the integrand
only shrinks there).  As soon as the integrand stays bounded along a 45
degree ray from the current height, the path bends onto that ray, where
``exp(-t x)`` decays exponentially.  Both pieces have computable tail
bounds, so truncation is chosen by bound, not guess.

Weights are rescaled so that the largest is 1.  ``nc`` holds ``b_j^2``.

Status codes: 0 ok, 1 truncation bound not reached, 2 quadrature panel
limit hit, 3 Simpson evaluation budget exhausted, 4 saddle point not found.
"""
import math

import numpy as np

RAY_SLOPE = 1.0
LOG_HEADROOM = math.log(1e3)
MAX_PANELS = 4000
MAX_DOUBLINGS = 200

# 15-point Kronrod nodes on [-1, 1] and weights, with embedded 7-point Gauss
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
WG = np.zeros(15)
WG[[1, 3, 5]] = _WG[:3]
WG[[13, 11, 9]] = _WG[:3]
WG[7] = _WG[3]


# ---------------------------------------------------------------------------
# cumulant generating function on the real axis


def _kprime(lam, nc, t):
    w = 1.0 - 2.0 * lam * t
    return float(np.sum(lam / w + nc * lam / (w * w)))


def _ksecond(lam, nc, t):
    w = 1.0 - 2.0 * lam * t
    return float(np.sum(2.0 * lam * lam / (w * w) + 4.0 * nc * lam * lam / (w * w * w)))


def _saddle(lam, nc, x):
    """Root of K'(t) = x on (-inf, 1/2); K' is increasing there."""
    hi = 0.5
    lo = 0.0
    if _kprime(lam, nc, lo) < x:
        # root in (0, 1/2)
        lo, hi = 0.0, 0.5
        t = 0.5 - 0.5 / max(x, 1e-300) * 0.5
        t = min(max(t, 0.0), 0.5 * (1 - 1e-16))
    else:
        step = 1.0
        lo = -step
        for _ in range(MAX_DOUBLINGS):
            if _kprime(lam, nc, lo) < x:
                break
            hi = lo
            step *= 2.0
            lo = -step
        else:
            return math.nan
        t = 0.5 * (lo + hi)
    for _ in range(200):
        if not (lo < t < hi):
            t = 0.5 * (lo + hi)
        g = _kprime(lam, nc, t) - x
        if g > 0:
            hi = t
        else:
            lo = t
        h = _ksecond(lam, nc, t)
        t_new = t - g / h if h > 0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-14 * max(1.0, abs(t)) or hi - lo <= 1e-15 * max(1.0, abs(t)):
            return t_new
        t = t_new
    return t


# ---------------------------------------------------------------------------
# path geometry and bounds


def _log_integrand(theta, lam, nc, x, power):
    """log(exp(K(theta) - theta x) / theta**power) for complex theta (vector)."""
    w = 1.0 - 2.0 * lam[:, None] * theta[None, :]
    k = np.sum(-0.5 * np.log(w) + 0.5 * nc[:, None] * (1.0 / w - 1.0), axis=0)
    return k - theta * x - power * np.log(theta)


def _log_mod_vertical(theta_a, tau, lam, nc, x, power, algebraic_mask=None):
    """log of an upper bound on |integrand| for all points above ``tau`` on the vertical."""
    a = 1.0 - 2.0 * lam * theta_a
    two_lt = 2.0 * lam * tau
    mod2 = a * a + two_lt * two_lt
    noncentral = 0.5 * float(np.sum(nc * (a / mod2 - 1.0)))
    return noncentral, a, mod2


def _vertical_tail(theta_a, T, lam, nc, x, power):
    """Bound on the integral of |integrand| over the vertical above height T."""
    noncentral, a, mod2 = _log_mod_vertical(theta_a, T, lam, nc, x, power)
    two_lt = 2.0 * lam * T
    alg = two_lt >= a
    if not np.any(alg):
        alg = lam == lam.max()
        alg = alg & (np.cumsum(alg) == 1)
    k2 = 0.5 * float(np.count_nonzero(alg))
    log_b = -theta_a * x + noncentral
    log_b += -0.25 * float(np.sum(np.log(mod2[~alg])))
    log_b += -0.5 * float(np.sum(np.log(2.0 * lam[alg])))
    e = k2 + power - 1.0
    log_b += -e * math.log(T) - math.log(e)
    return math.exp(log_b) if log_b < 700 else math.inf


def _sup_re_inv(w0, dw, R):
    """sup over r >= R of Re(1/(w0 + r dw)), together with the limit 0."""
    u0, v0, u1, v1 = w0.real, w0.imag, dw.real, dw.imag

    def f(r):
        u = u0 + u1 * r
        v = v0 + v1 * r
        return u / (u * u + v * v)

    # numerator of the derivative: u1 (v^2 - u^2) - 2 v1 u v, quadratic in r
    c2 = u1 * (v1 * v1 - u1 * u1) - 2.0 * v1 * u1 * v1
    c1 = u1 * 2.0 * (v0 * v1 - u0 * u1) - 2.0 * v1 * (u0 * v1 + u1 * v0)
    c0 = u1 * (v0 * v0 - u0 * u0) - 2.0 * v1 * u0 * v0
    best = max(f(R), 0.0)
    roots = np.roots([c2, c1, c0]) if (c2 or c1) else []
    for r in roots:
        if abs(r.imag) < 1e-12 * max(1.0, abs(r.real)) and r.real > R:
            best = max(best, f(r.real))
    return best


def _ray_log_amp(theta_a, T, R, lam, nc):
    """log bound on the noncentral factor over the ray beyond parameter R."""
    q = RAY_SLOPE
    total = 0.0
    for lj, ncj in zip(lam, nc):
        if ncj == 0.0:
            continue
        w0 = 1.0 - 2.0 * lj * complex(theta_a, T)
        dw = -2.0 * lj * complex(q, 1.0)
        total += 0.5 * ncj * max(0.0, _sup_re_inv(w0, dw, R) - 1.0)
    return total


def _ray_ok(theta_a, T, lam, nc, x, power, log_cap):
    """Sampled check that |integrand| stays below exp(log_cap) along the ray."""
    q = RAY_SLOPE
    r = T * np.geomspace(1e-3, 1e6, 80)
    theta = theta_a + q * r + 1j * (T + r)
    lm = _log_integrand(theta, lam, nc, x, power).real
    return bool(np.all(lm <= log_cap))


def _ray_tail(theta_a, T, R, lam, nc, x, power):
    q = RAY_SLOPE
    k = 0.5 * lam.size
    log_pre = (
        0.5 * math.log(1.0 + q * q)
        + _ray_log_amp(theta_a, T, R, lam, nc)
        - x * theta_a
        - 0.5 * float(np.sum(np.log(2.0 * lam)))
    )
    cands = [-(k + power) * math.log(T + R) - x * q * R - math.log(x * q)]
    e = k + power - 1.0
    if e > 0:
        cands.append(-e * math.log(T + R) - math.log(e))
    log_b = log_pre + min(cands)
    return math.exp(log_b) if log_b < 700 else math.inf


# ---------------------------------------------------------------------------
# quadrature


def _panel(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    v = f(mid + half * NODES)
    k = float(np.dot(WK, v))
    g = float(np.dot(WG, v))
    # QUADPACK-style error scaling
    resasc = abs(half) * float(np.dot(WK, np.abs(v - 0.5 * k)))
    err = abs(half * (k - g))
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if not (math.isfinite(err) and math.isfinite(k)):
        err = math.inf
    return half * k, err


def _adaptive(pieces, tol):
    """Global adaptive Gauss-Kronrod over several (f, breakpoints) pieces."""
    panels = []
    for f, edges in pieces:
        for a, b in zip(edges[:-1], edges[1:]):
            if b > a:
                v, err = _panel(f, a, b)
                panels.append([err, a, b, v, f])
    evals = 15 * len(panels)
    status = 0
    while True:
        total_err = sum(p[0] for p in panels)
        if total_err <= tol:
            break
        if len(panels) >= MAX_PANELS or not math.isfinite(total_err):
            status = 2
            break
        i = max(range(len(panels)), key=lambda j: panels[j][0])
        _, a, b, _, f = panels.pop(i)
        m = 0.5 * (a + b)
        for lo, hi in ((a, m), (m, b)):
            v, err = _panel(f, lo, hi)
            panels.append([err, lo, hi, v, f])
        evals += 30
    value = math.fsum(p[3] for p in panels)
    return value, sum(p[0] for p in panels), status, evals


def _geometric(start, stop, first):
    edges = [start]
    e = start + first
    while e < stop:
        edges.append(e)
        e = start + 4.0 * (e - start)
    edges.append(stop)
    return edges


def _path_integral(lam, nc, x, tol, power):
    """Im of the integral of exp(K - t x) / t**power along the upper half path.

    Returns (value, error bound, status, evals, theta_a).
    """
    theta_hat = _saddle(lam, nc, x)
    if not math.isfinite(theta_hat):
        return math.nan, math.inf, 4, 0, math.nan
    sigma = 1.0 / math.sqrt(_ksecond(lam, nc, theta_hat))
    h = 0.5 * sigma
    theta_a = theta_hat
    if abs(theta_a) < h:
        theta_a = theta_hat - 2.0 * h
    tol_trunc = 0.25 * tol

    # climb the vertical until the tail is negligible or the ray is safe
    log_cap = max(0.0, float(_log_integrand(np.array([theta_a + 0j]), lam, nc, x, power)[0].real))
    log_cap += LOG_HEADROOM
    T = sigma
    use_ray = False
    for _ in range(MAX_DOUBLINGS):
        if _vertical_tail(theta_a, T, lam, nc, x, power) <= tol_trunc:
            break
        if _ray_ok(theta_a, T, lam, nc, x, power, log_cap):
            use_ray = True
            break
        T *= 2.0
    else:
        return math.nan, _vertical_tail(theta_a, T, lam, nc, x, power), 1, 0, theta_a

    trunc = 0.0
    q = RAY_SLOPE

    def f_vert(tau):
        theta = theta_a + 1j * tau
        return np.exp(_log_integrand(theta, lam, nc, x, power)).real

    scale0 = min(sigma, abs(theta_a))
    pieces = [(f_vert, _geometric(0.0, T, scale0))]
    if use_ray:
        R = max(sigma, T)
        for _ in range(MAX_DOUBLINGS):
            if _ray_tail(theta_a, T, R, lam, nc, x, power) <= tol_trunc:
                break
            R *= 2.0
        else:
            return math.nan, _ray_tail(theta_a, T, R, lam, nc, x, power), 1, 0, theta_a
        trunc = _ray_tail(theta_a, T, R, lam, nc, x, power)

        def f_ray(r):
            theta = theta_a + q * r + 1j * (T + r)
            return ((q + 1j) * np.exp(_log_integrand(theta, lam, nc, x, power))).imag

        first = min(T, 1.0 / (x * q)) if x > 0 else T
        pieces.append((f_ray, _geometric(0.0, R, max(first, 1e-300))))
    else:
        trunc = _vertical_tail(theta_a, T, lam, nc, x, power)

    value, qerr, status, evals = _adaptive(pieces, max(0.5 * tol, tol - 2 * trunc) * math.pi)
    return value, qerr + trunc * math.pi, status, evals, theta_a


def _normalize(lam, nc):
    lam = np.ascontiguousarray(lam, dtype=float)
    nc = np.ascontiguousarray(nc, dtype=float)
    scale = float(lam.max())
    return lam / scale, nc, scale


def cdf_weighted(lam, nc, x, tol):
    """P(sum lam_j (z_j + b_j)^2 <= x) for positive ``lam``, ``nc = b^2``.

    Returns ``(value, error_bound, status, evals)``.
    """
    if x <= 0.0:
        return 0.0, 0.0, 0, 0
    lam, nc, scale = _normalize(lam, nc)
    v, err, status, evals, theta_a = _path_integral(lam, nc, x / scale, tol, 1)
    err /= math.pi
    if theta_a > 0:
        value = 1.0 - v / math.pi
    else:
        value = -v / math.pi
    return value, err, status, evals


def ei_contour(lam, nc, X, tol):
    """E[(X - Q)^+], the integral of the CDF over [0, X], as one inversion.

    Returns ``(value, error_bound, status, evals)``.
    """
    if X <= 0.0:
        return 0.0, 0.0, 0, 0
    lam, nc, scale = _normalize(lam, nc)
    Xs = X / scale
    v, err, status, evals, theta_a = _path_integral(lam, nc, Xs, tol / scale, 2)
    value = v / math.pi
    if theta_a > 0:
        value += Xs - float(np.sum(lam * (1.0 + nc)))
    return value * scale, err / math.pi * scale, status, evals


def ei_simpson(lam, nc, X, rtol, atol, max_evals, cdf_tol):
    """Integral of the CDF over [0, X] by adaptive Simpson on CDF values.

    Returns ``(value, error_estimate, status, cdf_evaluations)``.
    """
    if X <= 0.0:
        return 0.0, 0.0, 0, 0
    lam, nc, scale = _normalize(lam, nc)
    Xs = X / scale
    status = 0
    count = 0

    def G(t):
        nonlocal count, status
        count += 1
        if t <= 0.0:
            return 0.0
        v, _, st, _, theta_a = _path_integral(lam, nc, t, cdf_tol, 1)
        if st and not status:
            status = st
        return 1.0 - v / math.pi if theta_a > 0 else -v / math.pi

    # coarse 9-point pass fixes the absolute target
    xs = np.linspace(0.0, Xs, 9)
    fs = [G(t) for t in xs]
    h = Xs / 8.0
    coarse = h / 3.0 * (fs[0] + fs[8] + 4 * sum(fs[1:8:2]) + 2 * sum(fs[2:7:2]))
    eps_total = max(rtol * abs(coarse), atol / scale)

    stack = []
    for i in range(6, -1, -2):
        a, m, b = xs[i], xs[i + 1], xs[i + 2]
        fa, fm, fb = fs[i], fs[i + 1], fs[i + 2]
        whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
        stack.append((a, b, fa, fm, fb, whole, eps_total / 4.0))
    total = 0.0
    err_total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, eps = stack.pop()
        m = 0.5 * (a + b)
        if count + 2 > max_evals:
            total += whole
            err_total += eps
            status = status or 3
            continue
        flm = G(0.5 * (a + m))
        frm = G(0.5 * (m + b))
        left = (m - a) / 6.0 * (fa + 4 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or (b - a) <= 1e-13 * Xs:
            total += left + right + delta / 15.0
            err_total += abs(delta) / 15.0
        else:
            stack.append((m, b, fm, frm, fb, right, 0.5 * eps))
            stack.append((a, m, fa, flm, fm, left, 0.5 * eps))
    return total * scale, err_total * scale, status, count
