# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar-loop versions of the kernels in ``_kernels_py``.

Same signatures and semantics; each element is processed independently
with its own quadrature range, so results may differ from the numpy
version in the last few ulps.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport (exp, log, log1p, sqrt, sinh, cosh, asinh, fabs,
                        isnan, isinf, INFINITY, NAN, M_PI, ceil, fmin, fmax)

cnp.import_array()

cdef double EPS = 2.220446049250313e-16
cdef double LOG_BIG = 600.0
cdef double GOLD = 0.6180339887498949


cdef inline double softplus(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double logaddexp(double a, double b) nogil:
    cdef double m
    if isinf(a) and a < 0:
        return b
    if isinf(b) and b < 0:
        return a
    m = fmax(a, b)
    return m + log1p(exp(-fabs(a - b)))


cdef inline double phi(double lu, double l1u, double al, double be, double ga,
                       double logy, double de, double ep) nogil:
    cdef double out = 0.0, lmix
    if al != 0:
        out += al * lu
    if be != 0:
        out += be * l1u
    if ga != 0:
        if isinf(logy) and logy < 0:
            lmix = l1u
        else:
            lmix = logaddexp(l1u, logy + lu)
        out += ga * lmix
    if de != 0:
        out += de * exp(fmin(lu - l1u, 700.0))
    if ep != 0:
        out += ep * exp(lu)
    return out


cdef inline double phi_logit(double z, double al, double be, double ga,
                             double logy, double de, double ep) nogil:
    return phi(-softplus(-z), -softplus(z), al, be, ga, logy, de, ep)


cdef double find_mode(double al, double be, double ga, double logy,
                      double de, double ep, double* grid_lu, double* grid_l1u) nogil:
    cdef int i, best = 0, n = 73
    cdef double v, vbest = -INFINITY, lo, hi, x1, x2, f1, f2
    for i in range(n):
        v = phi(grid_lu[i], grid_l1u[i], al, be, ga, logy, de, ep)
        if not isnan(v) and v > vbest:
            vbest = v
            best = i
    if best == 0 or best == n - 1:
        return NAN
    lo = -36.0 + best - 1
    hi = -36.0 + best + 1
    for i in range(40):
        x1 = hi - GOLD * (hi - lo)
        x2 = lo + GOLD * (hi - lo)
        f1 = phi_logit(x1, al, be, ga, logy, de, ep)
        f2 = phi_logit(x2, al, be, ga, logy, de, ep)
        if f1 > f2:
            hi = x2
        else:
            lo = x1
    return 0.5 * (lo + hi)


cdef struct Acc:
    double ref
    double acc


cdef inline void acc_add(Acc* a, double v) nogil:
    if isnan(v) or (isinf(v) and v < 0):
        return
    if v > a.ref:
        if isinf(a.ref):
            a.acc = 1.0
        else:
            a.acc = a.acc * exp(a.ref - v) + 1.0
        a.ref = v
    else:
        a.acc += exp(v - a.ref)


# Node tables on the finest level: s_j = j * H_MIN for |j| <= J_MAX.
# Coarser levels read every 2^(LEVELS - level)-th entry.
DEF LEVELS = 8
DEF H0 = 0.5
DEF S_CAP = 12.0


cdef struct Nodes:
    double* logt
    double* log1t
    double* lwc    # log(t (1-t) pi cosh s), add log h per level
    long jmax


cdef inline void add_node(Acc* a, Nodes* nd, long j, double logh, int split,
                          double lu_s, double l1u_s, double al, double be,
                          double ga, double logy, double de, double ep) nogil:
    cdef double logt = nd.logt[j + nd.jmax]
    cdef double log1t = nd.log1t[j + nd.jmax]
    cdef double lw = nd.lwc[j + nd.jmax] + logh
    cdef double lu, l1u
    # side 0: [0, u*]
    lu = lu_s + logt
    l1u = logaddexp(l1u_s, lu_s + log1t)
    acc_add(a, phi(lu, l1u, al, be, ga, logy, de, ep) + lw + lu_s)
    if split:
        lu = logaddexp(lu_s, l1u_s + logt)
        l1u = l1u_s + log1t
        acc_add(a, phi(lu, l1u, al, be, ga, logy, de, ep) + lw + l1u_s)


cdef void scalar_integral(double al, double be, double ga, double y, double de,
                          double ep, double rtol, Nodes* nd, double* grid_lu,
                          double* grid_l1u, double* out, double* err) nogil:
    cdef double logy = log(y) if y > 0 else -INFINITY
    cdef double zm = find_mode(al, be, ga, logy, de, ep, grid_lu, grid_l1u)
    cdef int split = 0 if isnan(zm) else 1
    cdef double lu_s = 0.0, l1u_s = -INFINITY
    cdef double e0, e1, expo, smax, h, prev_log, cur_log, e
    cdef long k, kmax, stride
    cdef int level
    cdef Acc a
    if split:
        lu_s = -softplus(-zm)
        l1u_s = -softplus(zm)
    e0 = al + 1.0
    if de < 0:
        e1 = INFINITY
    else:
        e1 = be + 1.0 + (ga if (isinf(logy) and logy < 0) else 0.0)
    expo = fmax(fmin(fmin(e0, e1), 1.0), 1e-3)
    smax = fmax(fmin(asinh(46.0 / (M_PI * expo)), S_CAP), 3.5)
    a.ref = -INFINITY
    a.acc = 0.0
    h = H0
    stride = 1 << LEVELS
    kmax = <long>ceil(smax / h)
    for k in range(-kmax, kmax + 1):
        add_node(&a, nd, k * stride, log(h), split, lu_s, l1u_s, al, be, ga, logy, de, ep)
    prev_log = log(a.acc) + a.ref
    e = INFINITY
    for level in range(LEVELS):
        a.acc *= 0.5
        h *= 0.5
        stride >>= 1
        kmax = <long>ceil(smax / h)
        for k in range(-kmax, kmax + 1):
            if k % 2 != 0:
                add_node(&a, nd, k * stride, log(h), split, lu_s, l1u_s, al, be, ga, logy, de, ep)
        cur_log = log(a.acc) + a.ref
        e = fabs(exp(cur_log - prev_log) - 1.0)
        prev_log = cur_log
        if e <= rtol or isinf(cur_log):
            break
    out[0] = prev_log
    err[0] = e


def _node_tables():
    h_min = H0 / 2 ** LEVELS
    jmax = int(np.ceil(S_CAP / h_min)) + (1 << LEVELS)
    s = np.arange(-jmax, jmax + 1) * h_min
    q = np.pi * np.sinh(s)
    logt = -np.logaddexp(0.0, -q)
    log1t = -np.logaddexp(0.0, q)
    lwc = logt + log1t + np.log(np.pi * np.cosh(s))
    z = np.arange(-36.0, 36.5, 1.0)
    return jmax, logt, log1t, lwc, -np.logaddexp(0.0, -z), -np.logaddexp(0.0, z)


_TABLES = _node_tables()


def log_beta_integral(al, be, ga, y, de, ep, double rtol=1e-13):
    """Return ``(log I, relative error estimate)`` as float arrays."""
    arrs = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (al, be, ga, y, de, ep)))
    shape = arrs[0].shape
    cdef const double[::1] A = np.ascontiguousarray(arrs[0].ravel())
    cdef const double[::1] B = np.ascontiguousarray(arrs[1].ravel())
    cdef const double[::1] G = np.ascontiguousarray(arrs[2].ravel())
    cdef const double[::1] Yv = np.ascontiguousarray(arrs[3].ravel())
    cdef const double[::1] D = np.ascontiguousarray(arrs[4].ravel())
    cdef const double[::1] E = np.ascontiguousarray(arrs[5].ravel())
    cdef Py_ssize_t n = A.shape[0], i
    res = np.empty(n)
    errs = np.empty(n)
    cdef double[::1] R = res
    cdef double[::1] Er = errs
    jmax, logt, log1t, lwc, glu, gl1u = _TABLES
    cdef double[::1] T0 = logt
    cdef double[::1] T1 = log1t
    cdef double[::1] T2 = lwc
    cdef double[::1] G0 = glu
    cdef double[::1] G1 = gl1u
    cdef Nodes nd
    nd.logt = &T0[0]
    nd.log1t = &T1[0]
    nd.lwc = &T2[0]
    nd.jmax = jmax
    with nogil:
        for i in range(n):
            scalar_integral(A[i], B[i], G[i], Yv[i], D[i], E[i], rtol, &nd,
                            &G0[0], &G1[0], &R[i], &Er[i])
    return res.reshape(shape), errs.reshape(shape)


cdef void scalar_series(double* num, int nn, double* den, int nd, double z,
                        double rtol, long max_terms, double* logabs,
                        double* sign, double* err) nogil:
    cdef double total = 1.0, term = 1.0, abs_sum = 1.0, logscale = 0.0
    cdef double ratio, f = exp(-LOG_BIG), big = exp(LOG_BIG)
    cdef long k, nterms = 0
    cdef int j, active = 1
    for k in range(max_terms):
        ratio = z
        for j in range(nn):
            ratio *= num[j] + k
        for j in range(nd):
            ratio /= den[j] + k
        ratio /= k + 1.0
        term *= ratio
        total += term
        abs_sum += fabs(term)
        nterms += 1
        if abs_sum > big:
            term *= f
            total *= f
            abs_sum *= f
            logscale += LOG_BIG
        if term == 0 or (fabs(ratio) < 1.0 and fabs(term) <= 0.25 * rtol * fabs(total) and k > 2):
            active = 0
            break
    logabs[0] = log(fabs(total)) + logscale
    sign[0] = (total > 0) - (total < 0)
    if active:
        err[0] = INFINITY
    else:
        err[0] = (4.0 * EPS * (nterms + 1) * abs_sum + fabs(term)) / fabs(total)


def _series(pars_num, pars_den, z, double rtol, long max_terms):
    arrs = np.broadcast_arrays(np.asarray(z, dtype=float),
                               *(np.asarray(p, dtype=float) for p in pars_num),
                               *(np.asarray(p, dtype=float) for p in pars_den))
    shape = arrs[0].shape
    cdef int nn = len(pars_num), nd = len(pars_den), j
    cdef const double[:, ::1] P = np.ascontiguousarray(np.stack([a.ravel() for a in arrs[1:]], axis=1)) \
        if nn + nd else np.zeros((arrs[0].size, 1))
    cdef const double[::1] Z = np.ascontiguousarray(arrs[0].ravel())
    cdef Py_ssize_t n = Z.shape[0], i
    la = np.empty(n)
    sg = np.empty(n)
    er = np.empty(n)
    cdef double[::1] LA = la
    cdef double[::1] SG = sg
    cdef double[::1] ER = er
    cdef double num[4]
    cdef double den[4]
    with nogil:
        for i in range(n):
            for j in range(nn):
                num[j] = P[i, j]
            for j in range(nd):
                den[j] = P[i, nn + j]
            scalar_series(num, nn, den, nd, Z[i], rtol, max_terms, &LA[i], &SG[i], &ER[i])
    return la.reshape(shape), sg.reshape(shape), er.reshape(shape)


def series_2f1(a, b, c, z, double rtol=1e-15, long max_terms=100000):
    """Gauss series for 2F1(a, b; c; z); returns (log|S|, sign, relerr)."""
    return _series((a, b), (c,), z, rtol, max_terms)


def series_1f1(a, b, z, double rtol=1e-15, long max_terms=100000):
    """Kummer series for 1F1(a; b; z); returns (log|S|, sign, relerr)."""
    return _series((a,), (b,), z, rtol, max_terms)
