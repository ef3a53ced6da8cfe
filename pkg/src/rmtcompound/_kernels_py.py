"""Pure numpy implementation of the numerical kernels.

This is the fallback used when the compiled extension ``_kernels`` is not
available. Both modules expose the same three functions with the same
semantics; results agree to within the requested tolerance but are not
bit-identical.

log_beta_integral
    Log of ``I = int_0^1 u^al (1-u)^be ((1-u) + y u)^ga
    exp(de u/(1-u) + ep u) du`` by double-exponential (tanh-sinh)
    quadrature, split at the mode of the integrand.
series_2f1, series_1f1
    Ascending hypergeometric series with overflow rescaling, returning
    ``log|S|``, ``sign(S)`` and an error estimate that accounts for
    cancellation.
"""

import numpy as np

EPS = np.finfo(float).eps
_LOG_BIG = 600.0
_GOLD = 0.5 * (np.sqrt(5.0) - 1.0)
_MODE_GRID = np.arange(-36.0, 36.5, 1.0)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _phi(lu, l1u, al, be, ga, logy, de, ep):
    """Log integrand given log(u) and log(1-u)."""
    out = al * lu + be * l1u
    if np.any(ga != 0):
        lmix = np.where(np.isneginf(logy), l1u, np.logaddexp(l1u, logy + lu))
        out = out + np.where(ga != 0, ga * lmix, 0.0)
    if np.any(de != 0):
        ratio = np.exp(np.minimum(lu - l1u, 700.0))
        out = out + np.where(de != 0, de * ratio, 0.0)
    if np.any(ep != 0):
        out = out + ep * np.exp(lu)
    return out


def _phi_logit(z, al, be, ga, logy, de, ep):
    lu = -_softplus(-z)
    l1u = -_softplus(z)
    return _phi(lu, l1u, al, be, ga, logy, de, ep)


def _find_mode(al, be, ga, logy, de, ep):
    """Logit of the maximiser of the log integrand, or nan at a boundary."""
    grid = _MODE_GRID[None, :]
    vals = _phi_logit(grid, al[:, None], be[:, None], ga[:, None],
                      logy[:, None], de[:, None], ep[:, None])
    vals = np.where(np.isnan(vals), -np.inf, vals)
    idx = np.argmax(vals, axis=1)
    last = grid.shape[1] - 1
    interior = (idx > 0) & (idx < last)
    lo = _MODE_GRID[np.clip(idx - 1, 0, last)]
    hi = _MODE_GRID[np.clip(idx + 1, 0, last)]
    x1 = hi - _GOLD * (hi - lo)
    x2 = lo + _GOLD * (hi - lo)
    f1 = _phi_logit(x1, al, be, ga, logy, de, ep)
    f2 = _phi_logit(x2, al, be, ga, logy, de, ep)
    for _ in range(40):
        left = f1 > f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x1 = hi - _GOLD * (hi - lo)
        x2 = lo + _GOLD * (hi - lo)
        f1 = _phi_logit(x1, al, be, ga, logy, de, ep)
        f2 = _phi_logit(x2, al, be, ga, logy, de, ep)
    zm = 0.5 * (lo + hi)
    return np.where(interior, zm, np.nan)


def _piece_logs(logt, log1t, lu_s, l1u_s, side):
    """Map tanh-sinh variable t in (0,1) onto one side of the split point.

    side 0 covers [0, u*], side 1 covers [u*, 1]; the whole interval is
    side 0 with u* = 1 (lu_s = 0, l1u_s = -inf).
    """
    if side == 0:
        lu = lu_s + logt
        l1u = np.logaddexp(l1u_s, lu_s + log1t)
        ljac = lu_s
    else:
        lu = np.logaddexp(lu_s, l1u_s + logt)
        l1u = l1u_s + log1t
        ljac = l1u_s
    return lu, l1u, ljac


def _endpoint_exponent(al, be, ga, logy, de):
    """Smallest effective power of the integrand at a singular endpoint."""
    e0 = al + 1.0
    e1 = np.where(de < 0, np.inf, be + 1.0 + np.where(np.isneginf(logy), ga, 0.0))
    return np.minimum(np.minimum(e0, e1), 1.0)


def log_beta_integral(al, be, ga, y, de, ep, rtol=1e-13):
    """Return ``(log I, relative error estimate)`` as float arrays."""
    al, be, ga, y, de, ep = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (al, be, ga, y, de, ep)))
    shape = al.shape
    al, be, ga, y, de, ep = (v.ravel().copy() for v in (al, be, ga, y, de, ep))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logy = np.log(y)
        zm = _find_mode(al, be, ga, logy, de, ep)
        split = ~np.isnan(zm)
        lu_s = np.where(split, -_softplus(-np.nan_to_num(zm)), 0.0)
        l1u_s = np.where(split, -_softplus(np.nan_to_num(zm)), -np.inf)
        expo = np.maximum(_endpoint_exponent(al, be, ga, logy, de), 1e-3)
        smax = float(np.max(np.minimum(np.arcsinh(46.0 / (np.pi * expo)), 12.0), initial=0.0))
        smax = max(smax, 3.5)

        n = al.size
        ref = np.full(n, -np.inf)
        acc = np.zeros(n)

        def add_nodes(s, h):
            nonlocal ref, acc
            q = np.pi * np.sinh(s)
            logt = -_softplus(-q)
            log1t = -_softplus(q)
            lw = logt + log1t + np.log(np.pi * np.cosh(s)) + np.log(h)
            for side in (0, 1):
                lu, l1u, ljac = _piece_logs(logt[None, :], log1t[None, :],
                                            lu_s[:, None], l1u_s[:, None], side)
                vals = _phi(lu, l1u, al[:, None], be[:, None], ga[:, None],
                            logy[:, None], de[:, None], ep[:, None])
                vals = vals + lw[None, :] + ljac
                if side == 1:
                    vals = np.where(split[:, None], vals, -np.inf)
                vals = np.where(np.isnan(vals), -np.inf, vals)
                m = np.max(vals, axis=1)
                new_ref = np.maximum(ref, m)
                fin = np.isfinite(new_ref)
                scale = np.where(fin & np.isfinite(ref), np.exp(ref - new_ref), 0.0)
                acc = acc * scale
                contrib = np.where(fin[:, None], np.exp(vals - np.where(fin, new_ref, 0.0)[:, None]), 0.0)
                acc = acc + contrib.sum(axis=1)
                ref = new_ref

        h = 0.5
        k = np.arange(-int(np.ceil(smax / h)), int(np.ceil(smax / h)) + 1)
        add_nodes(k * h, h)
        prev_log = np.log(acc) + ref
        err = np.full(n, np.inf)
        for _ in range(8):
            # halving h: old sum * 1/2 + new odd nodes * new h
            ref_before = ref.copy()
            acc = acc * 0.5
            h = h / 2.0
            kk = np.arange(-int(np.ceil(smax / h)), int(np.ceil(smax / h)) + 1)
            kk = kk[kk % 2 != 0]
            add_nodes(kk * h, h)
            cur_log = np.log(acc) + ref
            err = np.abs(np.expm1(cur_log - prev_log))
            prev_log = cur_log
            if np.all(err[np.isfinite(cur_log)] <= rtol):
                break
        result = prev_log
    return result.reshape(shape), err.reshape(shape)


def _series(pars_num, pars_den, z, rtol, max_terms):
    z = np.asarray(z, dtype=float)
    num = [np.asarray(p, dtype=float) for p in pars_num]
    den = [np.asarray(p, dtype=float) for p in pars_den]
    arrs = np.broadcast_arrays(z, *num, *den)
    shape = arrs[0].shape
    z = arrs[0].ravel()
    num = [a.ravel() for a in arrs[1:1 + len(num)]]
    den = [a.ravel() for a in arrs[1 + len(num):]]
    n = z.size
    total = np.ones(n)
    term = np.ones(n)
    abs_sum = np.ones(n)
    logscale = np.zeros(n)
    active = np.ones(n, dtype=bool)
    nterms = np.zeros(n, dtype=np.int64)
    for k in range(max_terms):
        ratio = z.copy()
        for p in num:
            ratio = ratio * (p + k)
        for q in den:
            ratio = ratio / (q + k)
        ratio = ratio / (k + 1.0)
        term = np.where(active, term * ratio, term)
        total = np.where(active, total + term, total)
        abs_sum = np.where(active, abs_sum + np.abs(term), abs_sum)
        nterms = nterms + active
        big = active & (abs_sum > np.exp(_LOG_BIG))
        if np.any(big):
            f = np.exp(-_LOG_BIG)
            term = np.where(big, term * f, term)
            total = np.where(big, total * f, total)
            abs_sum = np.where(big, abs_sum * f, abs_sum)
            logscale = np.where(big, logscale + _LOG_BIG, logscale)
        decreasing = np.abs(ratio) < 1.0
        small = np.abs(term) <= 0.25 * rtol * np.abs(total)
        done = (term == 0) | (decreasing & small & (k > 2))
        active = active & ~done
        if not np.any(active):
            break
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(total)) + logscale
        err = (4.0 * EPS * (nterms + 1) * abs_sum + np.abs(term)) / np.abs(total)
    err = np.where(active, np.inf, err)
    return logabs.reshape(shape), np.sign(total).reshape(shape), err.reshape(shape)


def series_2f1(a, b, c, z, rtol=1e-15, max_terms=100000):
    """Gauss series for 2F1(a, b; c; z); returns (log|S|, sign, relerr)."""
    return _series((a, b), (c,), z, rtol, max_terms)


def series_1f1(a, b, z, rtol=1e-15, max_terms=100000):
    """Kummer series for 1F1(a; b; z); returns (log|S|, sign, relerr)."""
    return _series((a,), (b,), z, rtol, max_terms)
