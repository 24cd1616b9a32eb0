# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CDF and partial-expectation kernels for positive quadratic forms.

Same algorithm, signatures and status codes as ``_imhof_py``; see that
module for the description of the integration path.
"""
from libc.math cimport sqrt, log, exp, fabs, isfinite, INFINITY, NAN
from libc.stdlib cimport malloc, free

import numpy as np

cdef extern from "complex.h" nogil:
    double complex clog(double complex)
    double complex cexp(double complex)
    double creal(double complex)
    double cimag(double complex)

cdef enum:
    NGK = 15

cdef double RAY_SLOPE = 1.0
cdef double LOG_HEADROOM = 6.907755278982137  # log(1e3)
cdef int MAX_PANELS = 4000
cdef int MAX_DOUBLINGS = 200

cdef double XGK[8]
XGK[:] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
]
cdef double WGK[8]
WGK[:] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
]
cdef double WG4[4]
WG4[:] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
]

cdef double NODES[NGK]
cdef double WK[NGK]
cdef double WG[NGK]

cdef void _init_rule() noexcept:
    cdef int i
    for i in range(7):
        NODES[i] = -XGK[i]
        NODES[14 - i] = XGK[i]
        WK[i] = WGK[i]
        WK[14 - i] = WGK[i]
        WG[i] = 0.0
        WG[14 - i] = 0.0
    NODES[7] = 0.0
    WK[7] = WGK[7]
    WG[7] = WG4[3]
    WG[1] = WG4[0]
    WG[13] = WG4[0]
    WG[3] = WG4[1]
    WG[11] = WG4[1]
    WG[5] = WG4[2]
    WG[9] = WG4[2]

_init_rule()


cdef struct Problem:
    const double *lam
    const double *nc
    int n
    double x
    int power
    double theta_a
    double T
    int ray


cdef struct Panel:
    double a
    double b
    double value
    double err
    int piece


# -------------------------------------------------------------------------
# cumulant generating function on the real axis


cdef double _kprime(const double *lam, const double *nc, int n, double t) noexcept nogil:
    cdef double s = 0.0, w
    cdef int j
    for j in range(n):
        w = 1.0 - 2.0 * lam[j] * t
        s += lam[j] / w + nc[j] * lam[j] / (w * w)
    return s


cdef double _ksecond(const double *lam, const double *nc, int n, double t) noexcept nogil:
    cdef double s = 0.0, w, l2
    cdef int j
    for j in range(n):
        w = 1.0 - 2.0 * lam[j] * t
        l2 = lam[j] * lam[j]
        s += 2.0 * l2 / (w * w) + 4.0 * nc[j] * l2 / (w * w * w)
    return s


cdef double _saddle(const double *lam, const double *nc, int n, double x) noexcept nogil:
    cdef double lo = 0.0, hi = 0.5, t, step, g, h, t_new
    cdef int i
    if _kprime(lam, nc, n, 0.0) < x:
        lo = 0.0
        hi = 0.5
        t = 0.5 - 0.25 / (x if x > 1e-300 else 1e-300)
        if t < 0.0:
            t = 0.0
        if t > 0.5 * (1.0 - 1e-16):
            t = 0.5 * (1.0 - 1e-16)
    else:
        step = 1.0
        lo = -step
        i = 0
        while i < MAX_DOUBLINGS:
            if _kprime(lam, nc, n, lo) < x:
                break
            hi = lo
            step *= 2.0
            lo = -step
            i += 1
        if i == MAX_DOUBLINGS:
            return NAN
        t = 0.5 * (lo + hi)
    for i in range(200):
        if not (lo < t and t < hi):
            t = 0.5 * (lo + hi)
        g = _kprime(lam, nc, n, t) - x
        if g > 0:
            hi = t
        else:
            lo = t
        h = _ksecond(lam, nc, n, t)
        if h > 0:
            t_new = t - g / h
        else:
            t_new = 0.5 * (lo + hi)
        if not (lo < t_new and t_new < hi):
            t_new = 0.5 * (lo + hi)
        if (fabs(t_new - t) <= 1e-14 * (fabs(t) if fabs(t) > 1.0 else 1.0)
                or hi - lo <= 1e-15 * (fabs(t) if fabs(t) > 1.0 else 1.0)):
            return t_new
        t = t_new
    return t


# -------------------------------------------------------------------------
# integrand and bounds


cdef double complex _log_integrand(const Problem *p, double complex theta) noexcept nogil:
    cdef double complex acc = -theta * p.x - p.power * clog(theta)
    cdef double complex w
    cdef int j
    for j in range(p.n):
        w = 1.0 - 2.0 * p.lam[j] * theta
        acc += -0.5 * clog(w) + 0.5 * p.nc[j] * (1.0 / w - 1.0)
    return acc


cdef double _integrand(const Problem *p, int piece, double s) noexcept nogil:
    cdef double complex theta, v
    if piece == 0:
        theta = p.theta_a + 1j * s
        return creal(cexp(_log_integrand(p, theta)))
    theta = p.theta_a + RAY_SLOPE * s + 1j * (p.T + s)
    v = (RAY_SLOPE + 1j) * cexp(_log_integrand(p, theta))
    return cimag(v)


cdef double _vertical_tail(const Problem *p, double T) noexcept nogil:
    cdef double noncentral = 0.0, a, tl, mod2, log_b, e
    cdef double sum_mod = 0.0, sum_lam = 0.0
    cdef int j, k_alg = 0, jmax = 0
    for j in range(p.n):
        if p.lam[j] > p.lam[jmax]:
            jmax = j
    for j in range(p.n):
        a = 1.0 - 2.0 * p.lam[j] * p.theta_a
        tl = 2.0 * p.lam[j] * T
        mod2 = a * a + tl * tl
        noncentral += p.nc[j] * (a / mod2 - 1.0)
        if tl >= a:
            k_alg += 1
            sum_lam += log(2.0 * p.lam[j])
        else:
            sum_mod += log(mod2)
    if k_alg == 0:
        a = 1.0 - 2.0 * p.lam[jmax] * p.theta_a
        tl = 2.0 * p.lam[jmax] * T
        sum_mod -= log(a * a + tl * tl)
        sum_lam += log(2.0 * p.lam[jmax])
        k_alg = 1
    e = 0.5 * k_alg + p.power - 1.0
    log_b = -p.theta_a * p.x + 0.5 * noncentral - 0.25 * sum_mod - 0.5 * sum_lam
    log_b += -e * log(T) - log(e)
    if log_b > 700.0:
        return INFINITY
    return exp(log_b)


cdef double _re_inv(double u0, double v0, double u1, double v1, double r) noexcept nogil:
    cdef double u = u0 + u1 * r, v = v0 + v1 * r
    return u / (u * u + v * v)


cdef double _sup_re_inv(double u0, double v0, double u1, double v1, double R) noexcept nogil:
    """sup over r >= R of Re(1/(w0 + r dw)), together with the limit 0."""
    cdef double c2, c1, c0, disc, sq, r1, r2, best, f
    best = _re_inv(u0, v0, u1, v1, R)
    if best < 0.0:
        best = 0.0
    # derivative numerator u1 (v^2 - u^2) - 2 v1 u v, quadratic in r
    c2 = u1 * (v1 * v1 - u1 * u1) - 2.0 * v1 * u1 * v1
    c1 = u1 * 2.0 * (v0 * v1 - u0 * u1) - 2.0 * v1 * (u0 * v1 + u1 * v0)
    c0 = u1 * (v0 * v0 - u0 * u0) - 2.0 * v1 * u0 * v0
    if c2 == 0.0:
        if c1 != 0.0:
            r1 = -c0 / c1
            if r1 > R:
                f = _re_inv(u0, v0, u1, v1, r1)
                if f > best:
                    best = f
        return best
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return best
    sq = sqrt(disc)
    r1 = (-c1 - sq) / (2.0 * c2)
    r2 = (-c1 + sq) / (2.0 * c2)
    if r1 > R:
        f = _re_inv(u0, v0, u1, v1, r1)
        if f > best:
            best = f
    if r2 > R:
        f = _re_inv(u0, v0, u1, v1, r2)
        if f > best:
            best = f
    return best


cdef double _ray_log_amp(const Problem *p, double R) noexcept nogil:
    """log bound on the noncentral factor over the ray beyond parameter R."""
    cdef double q = RAY_SLOPE, total = 0.0, l2, sup
    cdef int j
    for j in range(p.n):
        if p.nc[j] == 0.0:
            continue
        l2 = 2.0 * p.lam[j]
        sup = _sup_re_inv(1.0 - l2 * p.theta_a, -l2 * p.T, -l2 * q, -l2, R)
        if sup > 1.0:
            total += 0.5 * p.nc[j] * (sup - 1.0)
    return total


cdef bint _ray_ok(Problem *p, double T, double log_cap) noexcept nogil:
    """Sampled check that |integrand| stays below exp(log_cap) along the ray."""
    cdef double q = RAY_SLOPE, r, ratio
    cdef double complex theta
    cdef int i
    ratio = exp(log(1e9) / 79.0)
    r = 1e-3 * T
    for i in range(80):
        theta = p.theta_a + q * r + 1j * (T + r)
        if creal(_log_integrand(p, theta)) > log_cap:
            return False
        r *= ratio
    return True


cdef double _ray_tail(const Problem *p, double R) noexcept nogil:
    cdef double q = RAY_SLOPE, sum_lam = 0.0, k, e, c2, best, log_b
    cdef int j
    for j in range(p.n):
        sum_lam += log(2.0 * p.lam[j])
    k = 0.5 * p.n
    best = INFINITY
    if p.x > 0:
        best = -(k + p.power) * log(p.T + R) - p.x * q * R - log(p.x * q)
    e = k + p.power - 1.0
    if e > 0:
        c2 = -e * log(p.T + R) - log(e)
        if c2 < best:
            best = c2
    log_b = 0.5 * log(1.0 + q * q) + _ray_log_amp(p, R) - p.x * p.theta_a - 0.5 * sum_lam + best
    if log_b > 700.0:
        return INFINITY
    return exp(log_b)


# -------------------------------------------------------------------------
# quadrature


cdef void _panel(const Problem *p, Panel *pn) noexcept nogil:
    cdef double half = 0.5 * (pn.b - pn.a), mid = 0.5 * (pn.a + pn.b)
    cdef double k = 0.0, g = 0.0, resasc = 0.0, err, ratio
    cdef double v[NGK]
    cdef int i
    for i in range(NGK):
        v[i] = _integrand(p, pn.piece, mid + half * NODES[i])
        k += WK[i] * v[i]
        g += WG[i] * v[i]
    # QUADPACK-style error scaling
    for i in range(NGK):
        resasc += WK[i] * fabs(v[i] - 0.5 * k)
    resasc *= fabs(half)
    err = fabs(half * (k - g))
    if resasc != 0.0 and err != 0.0:
        ratio = 200.0 * err / resasc
        if ratio < 1.0:
            err = resasc * ratio * sqrt(ratio)
        else:
            err = resasc
    pn.value = half * k
    pn.err = err
    if not isfinite(pn.err) or not isfinite(pn.value):
        pn.err = INFINITY


cdef int _push_geometric(const Problem *p, Panel *panels, int count, int piece,
                         double stop, double first) noexcept nogil:
    cdef double a = 0.0, e = first
    while True:
        if e >= stop:
            e = stop
        if count >= MAX_PANELS:
            return count
        panels[count].a = a
        panels[count].b = e
        panels[count].piece = piece
        _panel(p, &panels[count])
        count += 1
        if e >= stop:
            return count
        a = e
        e = 4.0 * e


cdef int _adaptive(const Problem *p, Panel *panels, int count, double tol,
                   double *value, double *err, long *evals) noexcept nogil:
    cdef double total, worst, a, b, m
    cdef int i, iw, status = 0, piece
    evals[0] += NGK * count
    while True:
        total = 0.0
        worst = -1.0
        iw = 0
        for i in range(count):
            total += panels[i].err
            if panels[i].err > worst:
                worst = panels[i].err
                iw = i
        if total <= tol:
            break
        if count + 1 >= MAX_PANELS or not isfinite(total):
            status = 2
            break
        a = panels[iw].a
        b = panels[iw].b
        piece = panels[iw].piece
        m = 0.5 * (a + b)
        panels[iw].b = m
        _panel(p, &panels[iw])
        panels[count].a = m
        panels[count].b = b
        panels[count].piece = piece
        _panel(p, &panels[count])
        count += 1
        evals[0] += 2 * NGK
    # compensated sum of panel values
    cdef double s = 0.0, c = 0.0, y, t
    total = 0.0
    for i in range(count):
        y = panels[i].value - c
        t = s + y
        c = (t - s) - y
        s = t
        total += panels[i].err
    value[0] = s
    err[0] = total
    return status


cdef int _path_integral(const double *lam, const double *nc, int n, double x,
                        double tol, int power, Panel *panels,
                        double *value, double *err, long *evals,
                        double *theta_out) noexcept nogil:
    cdef Problem p
    cdef double theta_hat, sigma, h, tol_trunc, T, trunc, R, scale0, first, qtol, qerr = 0.0, log_cap
    cdef int i, count, status
    p.lam = lam
    p.nc = nc
    p.n = n
    p.x = x
    p.power = power
    p.ray = 0
    theta_hat = _saddle(lam, nc, n, x)
    if not isfinite(theta_hat):
        value[0] = NAN
        err[0] = INFINITY
        theta_out[0] = NAN
        return 4
    sigma = 1.0 / sqrt(_ksecond(lam, nc, n, theta_hat))
    h = 0.5 * sigma
    p.theta_a = theta_hat
    if fabs(theta_hat) < h:
        p.theta_a = theta_hat - 2.0 * h
    theta_out[0] = p.theta_a
    tol_trunc = 0.25 * tol

    log_cap = creal(_log_integrand(&p, p.theta_a + 0j))
    if log_cap < 0.0:
        log_cap = 0.0
    log_cap += LOG_HEADROOM
    T = sigma
    i = 0
    while i < MAX_DOUBLINGS:
        if _vertical_tail(&p, T) <= tol_trunc:
            break
        if _ray_ok(&p, T, log_cap):
            p.ray = 1
            break
        T *= 2.0
        i += 1
    if i == MAX_DOUBLINGS:
        value[0] = NAN
        err[0] = _vertical_tail(&p, T)
        return 1
    p.T = T

    scale0 = sigma if sigma < fabs(p.theta_a) else fabs(p.theta_a)
    count = _push_geometric(&p, panels, 0, 0, T, scale0)
    if p.ray:
        R = sigma if sigma > T else T
        i = 0
        while i < MAX_DOUBLINGS:
            if _ray_tail(&p, R) <= tol_trunc:
                break
            R *= 2.0
            i += 1
        if i == MAX_DOUBLINGS:
            value[0] = NAN
            err[0] = _ray_tail(&p, R)
            return 1
        trunc = _ray_tail(&p, R)
        first = T
        if x > 0 and 1.0 / (x * RAY_SLOPE) < first:
            first = 1.0 / (x * RAY_SLOPE)
        if first < 1e-300:
            first = 1e-300
        count = _push_geometric(&p, panels, count, 1, R, first)
    else:
        trunc = _vertical_tail(&p, T)

    qtol = tol - 2.0 * trunc
    if qtol < 0.5 * tol:
        qtol = 0.5 * tol
    status = _adaptive(&p, panels, count, qtol * 3.141592653589793, value, &qerr, evals)
    err[0] = qerr + trunc * 3.141592653589793
    return status


# -------------------------------------------------------------------------
# Python entry points


cdef double PI = 3.141592653589793


def _prepare(lam, nc):
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    nc = np.ascontiguousarray(nc, dtype=np.float64)
    scale = float(lam.max())
    return np.ascontiguousarray(lam / scale), nc, scale


def cdf_weighted(lam, nc, double x, double tol):
    """P(sum lam_j (z_j + b_j)^2 <= x); returns (value, error_bound, status, evals)."""
    if x <= 0.0:
        return 0.0, 0.0, 0, 0
    lam_s, nc_a, scale = _prepare(lam, nc)
    cdef const double[::1] L = lam_s
    cdef const double[::1] C = nc_a
    cdef int n = L.shape[0]
    cdef double v, e, th
    cdef long evals = 0
    cdef int status
    cdef double xs = x / scale
    cdef Panel *panels = <Panel *> malloc(MAX_PANELS * sizeof(Panel))
    if panels == NULL:
        raise MemoryError()
    try:
        with nogil:
            status = _path_integral(&L[0], &C[0], n, xs, tol, 1, panels, &v, &e, &evals, &th)
    finally:
        free(panels)
    if th > 0:
        v = 1.0 - v / PI
    else:
        v = -v / PI
    return v, e / PI, status, evals


def ei_contour(lam, nc, double X, double tol):
    """E[(X - Q)^+] by a single inversion; returns (value, error_bound, status, evals)."""
    if X <= 0.0:
        return 0.0, 0.0, 0, 0
    lam_s, nc_a, scale = _prepare(lam, nc)
    cdef const double[::1] L = lam_s
    cdef const double[::1] C = nc_a
    cdef int n = L.shape[0], j
    cdef double v, e, th, mean = 0.0
    cdef long evals = 0
    cdef int status
    cdef double Xs = X / scale
    cdef double tol_s = tol / scale
    cdef Panel *panels = <Panel *> malloc(MAX_PANELS * sizeof(Panel))
    if panels == NULL:
        raise MemoryError()
    try:
        with nogil:
            status = _path_integral(&L[0], &C[0], n, Xs, tol_s, 2, panels, &v, &e, &evals, &th)
    finally:
        free(panels)
    v = v / PI
    if th > 0:
        for j in range(n):
            mean += L[j] * (1.0 + C[j])
        v += Xs - mean
    return v * scale, e / PI * scale, status, evals


cdef struct SimpsonState:
    const double *lam
    const double *nc
    int n
    double cdf_tol
    Panel *panels
    int count
    int status


cdef double _G(SimpsonState *st, double t) noexcept nogil:
    cdef double v, e, th
    cdef long evals = 0
    cdef int s
    st.count += 1
    if t <= 0.0:
        return 0.0
    s = _path_integral(st.lam, st.nc, st.n, t, st.cdf_tol, 1, st.panels, &v, &e, &evals, &th)
    if s != 0 and st.status == 0:
        st.status = s
    if th > 0:
        return 1.0 - v / PI
    return -v / PI


cdef struct Interval:
    double a
    double b
    double fa
    double fm
    double fb
    double whole
    double eps


def ei_simpson(lam, nc, double X, double rtol, double atol, long max_evals, double cdf_tol):
    """Integral of the CDF over [0, X] by adaptive Simpson.

    Returns (value, error_estimate, status, cdf_evaluations).
    """
    if X <= 0.0:
        return 0.0, 0.0, 0, 0
    lam_s, nc_a, scale = _prepare(lam, nc)
    cdef const double[::1] L = lam_s
    cdef const double[::1] C = nc_a
    cdef SimpsonState st
    cdef double sc = scale
    cdef double Xs = X / sc
    cdef double xs[9]
    cdef double fs[9]
    cdef double h, coarse, eps_total, total = 0.0, err_total = 0.0
    cdef double a, b, m, flm, frm, left, right, delta, odd, even
    cdef int i, top = 0, cap = 256
    cdef Interval cur
    cdef Interval *stack
    st.lam = &L[0]
    st.nc = &C[0]
    st.n = L.shape[0]
    st.cdf_tol = cdf_tol
    st.count = 0
    st.status = 0
    st.panels = <Panel *> malloc(MAX_PANELS * sizeof(Panel))
    stack = <Interval *> malloc(cap * sizeof(Interval))
    if st.panels == NULL or stack == NULL:
        free(st.panels)
        free(stack)
        raise MemoryError()
    try:
        with nogil:
            h = Xs / 8.0
            for i in range(9):
                xs[i] = h * i
                fs[i] = _G(&st, xs[i])
            odd = fs[1] + fs[3] + fs[5] + fs[7]
            even = fs[2] + fs[4] + fs[6]
            coarse = h / 3.0 * (fs[0] + fs[8] + 4.0 * odd + 2.0 * even)
            eps_total = rtol * fabs(coarse)
            if atol / sc > eps_total:
                eps_total = atol / sc
            i = 6
            while i >= 0:
                stack[top].a = xs[i]
                stack[top].b = xs[i + 2]
                stack[top].fa = fs[i]
                stack[top].fm = fs[i + 1]
                stack[top].fb = fs[i + 2]
                stack[top].whole = (xs[i + 2] - xs[i]) / 6.0 * (fs[i] + 4.0 * fs[i + 1] + fs[i + 2])
                stack[top].eps = eps_total / 4.0
                top += 1
                i -= 2
            while top > 0:
                top -= 1
                cur = stack[top]
                a = cur.a
                b = cur.b
                m = 0.5 * (a + b)
                if st.count + 2 > max_evals:
                    total += cur.whole
                    err_total += cur.eps
                    if st.status == 0:
                        st.status = 3
                    continue
                flm = _G(&st, 0.5 * (a + m))
                frm = _G(&st, 0.5 * (m + b))
                left = (m - a) / 6.0 * (cur.fa + 4.0 * flm + cur.fm)
                right = (b - m) / 6.0 * (cur.fm + 4.0 * frm + cur.fb)
                delta = left + right - cur.whole
                if fabs(delta) <= 15.0 * cur.eps or (b - a) <= 1e-13 * Xs or top + 2 > cap:
                    total += left + right + delta / 15.0
                    err_total += fabs(delta) / 15.0
                else:
                    stack[top].a = m
                    stack[top].b = b
                    stack[top].fa = cur.fm
                    stack[top].fm = frm
                    stack[top].fb = cur.fb
                    stack[top].whole = right
                    stack[top].eps = 0.5 * cur.eps
                    top += 1
                    stack[top].a = a
                    stack[top].b = m
                    stack[top].fa = cur.fa
                    stack[top].fm = flm
                    stack[top].fb = cur.fm
                    stack[top].whole = left
                    stack[top].eps = 0.5 * cur.eps
                    top += 1
    finally:
        free(st.panels)
        free(stack)
    return total * scale, err_total * scale, st.status, st.count
