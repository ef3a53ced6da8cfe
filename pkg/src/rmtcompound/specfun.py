"""Special functions used by the model densities.

All functions accept scalars or numpy arrays (broadcast together) and
return a float for scalar input. Log variants return ``log|f|``; the
signed helpers ``*_signed`` also return the sign and an error estimate.

Evaluation strategy
-------------------
ln_gamma, bessel_j, bessel_k
    scipy.special (``gammaln``, ``jv``, ``kve``). ``log_bessel_k`` uses
    upward recurrence in the order from ``nu - floor(nu)`` when
    ``|nu| > 20`` or when ``kve`` overflows.
kummer_1f1(a, b, x)
    1. ``b > a > 0``: Euler integral (positive integrand, any x).
    2. otherwise the ascending series of both the direct and the
       Kummer-transformed form, keeping the one with the smaller
       cancellation estimate; the series are only attempted for
       ``|x| <= 1e4``.
    3. if the error is still above tolerance and ``|x| > 30 + 2(|a| + |b|)``,
       the large-argument asymptotic expansion.
    4. points still above tolerance with ``|x| <= 1e3`` are summed again
       in decimal arithmetic with enough digits to absorb the
       cancellation the double-precision pass reported.
tricomi_u(a, b, x), a > 0
    Integral ``U = 1/Gamma(a) int_0^inf t^(a-1) (1+t)^(b-a-1) e^(-x t) dt``
    mapped to [0, 1]; valid for every x > 0 without switching.
gauss_2f1(a, b, c, x), x < 1
    1. ``x == 0``: 1.
    2. ``c > b > 0`` (or ``c > a > 0`` after swapping a and b): Euler
       integral with ``(1 - x u) = (1 - u) + (1 - x) u`` kept positive,
       which covers the approach to x = 1 and large negative x alike.
    3. otherwise the direct series for ``|x| <= 0.5``, the Pfaff
       transform ``(1-x)^(-a) 2F1(a, c-b; c; x/(x-1))`` for
       ``-1 <= x < 0`` and the connection formula to ``1 - x`` for
       ``0.5 < x < 1`` when ``c - a - b`` is not an integer, and for
       ``x < -1`` the Pfaff transform followed by the connection formula;
       the smallest error estimate wins.

Known weak regime: 1F1 with ``|x| > 1e3`` outside the Euler and
asymptotic regimes, and 2F1 with ``c`` below both ``a`` and ``b`` near the
series boundaries; these raise ``PrecisionError`` when the error estimate
exceeds tolerance. The model densities never evaluate either.

Integrals use double-exponential quadrature from ``kernels`` (compiled
when available). Failure to reach ``policy.rel_tol`` raises
``PrecisionError`` carrying the best value and its estimated error.
"""

import decimal
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from . import kernels
from .errors import DomainError, PrecisionError

_ROUNDOFF_FLOOR = 1e-14
_K_RECURRENCE_ORDER = 20.0


@dataclass(frozen=True)
class EvalPolicy:
    """Accuracy contract for special-function evaluation."""

    rel_tol: float = 1e-12
    max_terms: int = 1_000_000
    log_space: bool = False

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise DomainError(f"rel_tol must lie in (0, 1e-6], got {self.rel_tol}")
        if self.max_terms < 1000:
            raise DomainError(f"max_terms must be >= 1000, got {self.max_terms}")


DEFAULT_POLICY = EvalPolicy()


def _policy(policy):
    return DEFAULT_POLICY if policy is None else policy


def _kernel_tol(policy):
    return max(0.1 * policy.rel_tol, _ROUNDOFF_FLOOR)


def _out(values, scalar):
    values = np.asarray(values, dtype=float)
    return float(values) if scalar else values


def _is_scalar(*args):
    return all(np.ndim(a) == 0 for a in args)


def _check_precision(name, logabs, sign, err, policy):
    # a value carried as log|f| cannot be more accurate than eps * |log f|
    floor = 16 * np.finfo(float).eps * (1.0 + np.abs(np.nan_to_num(logabs)))
    bad = ~(err <= np.maximum(policy.rel_tol, floor))
    if np.any(bad):
        worst = float(np.max(np.where(np.isnan(err), np.inf, err)))
        value = sign * np.exp(logabs)
        raise PrecisionError(
            f"{name}: estimated relative error {worst:.3g} exceeds rel_tol "
            f"{policy.rel_tol:.3g} at {int(np.count_nonzero(bad))} point(s)",
            value=value if value.ndim else float(value),
            error=worst,
        )


# --------------------------------------------------------------------- gamma

def ln_gamma(x):
    """Natural log of the Gamma function for x > 0."""
    scalar = _is_scalar(x)
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("ln_gamma requires x > 0")
    return _out(sc.gammaln(x), scalar)


def gamma_ratio(a, b, log=False):
    """``Gamma(a)/Gamma(b)`` for positive a, b, formed as a log difference."""
    scalar = _is_scalar(a, b)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError("gamma_ratio requires positive arguments")
    val = sc.gammaln(a) - sc.gammaln(b)
    return _out(val if log else np.exp(val), scalar)


def _signed_lgamma(x):
    """log|Gamma(x)| and sign(Gamma(x)) for any real x (inf at poles)."""
    x = np.asarray(x, dtype=float)
    return sc.gammaln(x), sc.gammasgn(x)


# -------------------------------------------------------------------- bessel

def bessel_j(nu, x):
    """Bessel function of the first kind J_nu(x) for nu >= 0, x >= 0."""
    scalar = _is_scalar(nu, x)
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)):
        raise DomainError("bessel_j requires x >= 0")
    if np.any(~(nu >= 0)):
        raise DomainError("bessel_j requires nu >= 0")
    out = sc.jv(nu, x)
    # jv flushes to zero well above the double underflow limit; two series
    # terms are exact to rounding once x^2 / (4 (nu + 1)) < 1e-8
    tiny = (x > 0) & (x * x < 4e-8 * (nu + 1.0))
    if np.any(tiny):
        nu_t, x_t = np.broadcast_arrays(nu, x)
        nu_t, x_t = nu_t[tiny], x_t[tiny]
        lead = np.exp(nu_t * np.log(0.5 * x_t) - sc.gammaln(nu_t + 1.0))
        out = np.array(out, dtype=float)
        out[tiny] = lead * (1.0 - 0.25 * x_t * x_t / (nu_t + 1.0))
    return _out(out, scalar)


def log_bessel_k(nu, x):
    """log K_nu(x) for real nu and x > 0, free of overflow and underflow."""
    scalar = _is_scalar(nu, x)
    nu, x = np.broadcast_arrays(np.abs(np.asarray(nu, dtype=float)),
                                np.asarray(x, dtype=float))
    if np.any(~(x > 0)):
        raise DomainError("bessel_k requires x > 0")
    with np.errstate(divide="ignore", over="ignore"):
        kve = sc.kve(nu, x)
        out = np.log(kve) - x
    # scipy's large-order branch loses digits; recur upward from nu - floor(nu)
    bad = ~np.isfinite(out) | (nu > _K_RECURRENCE_ORDER)
    if np.any(bad):
        out = np.array(out, dtype=float)
        out[bad] = _log_bessel_k_recurrence(nu[bad], x[bad])
    return _out(out, scalar)


def _log_bessel_k_recurrence(nu, x):
    # K_{m+1} = K_{m-1} + (2m/x) K_m is stable upward; track log K and
    # the ratio K_{m+1}/K_m.
    frac = nu - np.floor(nu)
    steps = np.floor(nu).astype(np.int64)
    logk = np.log(sc.kve(frac, x)) - x
    ratio = sc.kve(frac + 1.0, x) / sc.kve(frac, x)
    for n in range(int(steps.max(initial=0))):
        active = n < steps
        logk = np.where(active, logk + np.log(ratio), logk)
        ratio = np.where(active, 1.0 / ratio + 2.0 * (frac + n + 1.0) / x, ratio)
    return logk


def bessel_k(nu, x, policy=None):
    """Modified Bessel function K_nu(x); ``policy.log_space`` returns log."""
    policy = _policy(policy)
    val = log_bessel_k(nu, x)
    return val if policy.log_space else _out(np.exp(val), _is_scalar(nu, x))


# ------------------------------------------------------------------ kummer 1F1

def _asymptotic_1f1(a, b, x, max_terms=200):
    """Large-|x| expansion; returns (log|.|, sign, err)."""
    a, b, x = np.broadcast_arrays(a, b, x)
    pos = x > 0
    ax = np.abs(x)
    # x > 0: Gamma(b)/Gamma(a) e^x x^(a-b) sum (b-a)_s (1-a)_s / s! x^-s
    # x < 0: Gamma(b)/Gamma(b-a) |x|^-a sum (a)_s (a-b+1)_s / s! |x|^-s
    p1 = np.where(pos, b - a, a)
    p2 = np.where(pos, 1.0 - a, a - b + 1.0)
    term = np.ones_like(ax)
    total = np.ones_like(ax)
    smallest = np.ones_like(ax)
    done = np.zeros(ax.shape, dtype=bool)
    for s in range(max_terms):
        nxt = term * (p1 + s) * (p2 + s) / ((s + 1.0) * ax)
        grow = np.abs(nxt) > np.abs(term)
        done = done | grow | (nxt == 0)
        term = np.where(done, term, nxt)
        total = np.where(done, total, total + nxt)
        smallest = np.where(done, smallest, np.minimum(smallest, np.abs(nxt)))
        if np.all(done):
            break
    lg_b, s_b = _signed_lgamma(b)
    lg_d, s_d = _signed_lgamma(np.where(pos, a, b - a))
    with np.errstate(divide="ignore", invalid="ignore"):
        logpow = np.where(pos, ax + (a - b) * np.log(ax), -a * np.log(ax))
        logabs = lg_b - lg_d + logpow + np.log(np.abs(total))
        sign = s_b * s_d * np.sign(total)
        # neglected exponentially small companion term
        other = np.where(pos, -ax - ax, -ax) + np.abs(a - b) * np.log(ax)
        err = np.abs(smallest / total) + np.exp(np.minimum(other - logpow, 0.0))
    return logabs, sign, err


def kummer_1f1_signed(a, b, x, policy=None):
    """``(log|1F1|, sign, relerr)`` arrays for 1F1(a; b; x)."""
    policy = _policy(policy)
    a, b, x = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(a, b, x))
    if np.any((b <= 0) & (b == np.round(b))):
        raise DomainError("kummer_1f1: b must not be a nonpositive integer")
    shape = a.shape
    a, b, x = a.ravel(), b.ravel(), x.ravel()
    n = a.size
    logabs = np.full(n, np.nan)
    sign = np.ones(n)
    err = np.full(n, np.inf)
    tol = _kernel_tol(policy)

    def take(mask, la, sg, er):
        better = mask & (er < err)
        logabs[better] = la[better]
        sign[better] = sg[better]
        err[better] = er[better]

    zero = x == 0
    take(zero, np.zeros(n), np.ones(n), np.zeros(n))

    euler = (~zero) & (b > a) & (a > 0)
    if np.any(euler):
        idx = np.flatnonzero(euler)
        aa, bb, xx = a[idx], b[idx], x[idx]
        li, er = kernels.log_beta_integral(aa - 1, bb - aa - 1, 0.0, 1.0, 0.0, xx, rtol=tol)
        la = np.full(n, np.nan)
        er_full = np.full(n, np.inf)
        la[idx] = li + sc.gammaln(bb) - sc.gammaln(aa) - sc.gammaln(bb - aa)
        er_full[idx] = er
        take(euler, la, np.ones(n), er_full)

    todo = (err > policy.rel_tol) & (np.abs(x) <= 1e4)
    if np.any(todo):
        idx = np.flatnonzero(todo)
        aa, bb, xx = a[idx], b[idx], x[idx]
        for ap, xs, shift in ((aa, xx, 0.0), (bb - aa, -xx, xx)):
            la, sg, er = kernels.series_1f1(ap, bb, xs, rtol=0.1 * tol,
                                            max_terms=policy.max_terms)
            full = [np.full(n, np.nan), np.ones(n), np.full(n, np.inf)]
            full[0][idx] = la + shift
            full[1][idx] = sg
            full[2][idx] = er
            take(todo, *full)

    todo = (err > policy.rel_tol) & (np.abs(x) > 30 + 2 * (np.abs(a) + np.abs(b)))
    if np.any(todo):
        la, sg, er = _asymptotic_1f1(a, b, x)
        take(todo, la, sg, er)

    todo = np.flatnonzero((err > policy.rel_tol) & (np.abs(x) <= 1e3))
    for i in todo:
        la, sg, er = _decimal_1f1(a[i], b[i], x[i], err[i], policy)
        if er < err[i]:
            logabs[i], sign[i], err[i] = la, sg, er

    return logabs.reshape(shape), sign.reshape(shape), err.reshape(shape)


def _decimal_1f1(a, b, x, double_err, policy):
    """Ascending 1F1 series in decimal arithmetic (scalar).

    Starts from 40 digits plus those lost to cancellation in the double
    pass and doubles the precision until the estimate meets tolerance.
    """
    lost = 0
    if np.isfinite(double_err):
        lost = max(0, int(math.log10(max(double_err, 1e-16) / 1e-16)))
    prec = 40 + lost + int(abs(x) / 2.3)
    best = (np.nan, 1.0, np.inf)
    while prec <= 1200:
        out = _decimal_1f1_at(a, b, x, prec, policy.max_terms)
        if out[2] < best[2]:
            best = out
        if best[2] <= policy.rel_tol:
            break
        prec *= 2
    return best


def _decimal_1f1_at(a, b, x, prec, limit):
    with decimal.localcontext() as ctx:
        ctx.prec = prec
        A, B, X = decimal.Decimal(float(a)), decimal.Decimal(float(b)), decimal.Decimal(float(x))
        term = total = mag = decimal.Decimal(1)
        eps = decimal.Decimal(10) ** (-prec + 3)
        k = 0
        while k < limit:
            term = term * (A + k) * X / ((B + k) * (k + 1))
            k += 1
            total += term
            mag += abs(term)
            if term == 0 or (k > abs(x) + abs(a) and abs(term) <= eps * abs(total)):
                break
        else:
            return np.nan, 1.0, np.inf
        if total == 0:
            return -np.inf, 1.0, np.inf
        rel = max(float(mag / abs(total) * eps), 1e-17)
        return float(abs(total).ln()), (1.0 if total > 0 else -1.0), rel


def kummer_1f1(a, b, x, policy=None):
    """Confluent hypergeometric function 1F1(a; b; x) (real arguments)."""
    policy = _policy(policy)
    scalar = _is_scalar(a, b, x)
    la, sg, er = kummer_1f1_signed(a, b, x, policy)
    _check_precision("kummer_1f1", la, sg, er, policy)
    if policy.log_space:
        if np.any(sg < 0):
            raise DomainError("kummer_1f1: log_space requested for a negative value")
        return _out(la, scalar)
    return _out(sg * np.exp(la), scalar)


# ----------------------------------------------------------------- tricomi U

def log_tricomi_u_err(a, b, x, policy=None):
    """``(log U(a, b, x), relerr)`` for a > 0 and x > 0."""
    policy = _policy(policy)
    a, b, x = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(a, b, x))
    if np.any(~(x > 0)):
        raise DomainError("tricomi_u requires x > 0")
    if np.any(~(a > 0)):
        raise DomainError("tricomi_u requires a > 0")
    li, er = kernels.log_beta_integral(a - 1.0, -b, 0.0, 1.0, -x, 0.0,
                                       rtol=_kernel_tol(policy))
    return li - sc.gammaln(a), er


def log_tricomi_u(a, b, x, policy=None):
    """log of Tricomi's confluent hypergeometric function U(a, b, x)."""
    policy = _policy(policy)
    la, er = log_tricomi_u_err(a, b, x, policy)
    _check_precision("tricomi_u", la, np.ones_like(la), er, policy)
    return _out(la, _is_scalar(a, b, x))


def tricomi_u(a, b, x, policy=None):
    """Tricomi's U(a, b, x) for a > 0, x > 0 (positive for these arguments)."""
    policy = _policy(policy)
    la = log_tricomi_u(a, b, x, policy)
    return la if policy.log_space else _out(np.exp(la), _is_scalar(a, b, x))


# ------------------------------------------------------------------ gauss 2F1

def _connection_2f1(a, b, c, x, tol, max_terms):
    """1 - x connection formula; requires c - a - b non-integer."""
    s = c - a - b
    y = 1.0 - x
    la1, sg1, er1 = kernels.series_2f1(a, b, 1.0 - s, y, rtol=tol, max_terms=max_terms)
    la2, sg2, er2 = kernels.series_2f1(c - a, c - b, 1.0 + s, y, rtol=tol, max_terms=max_terms)
    gc, sgc = _signed_lgamma(c)
    g1 = [_signed_lgamma(v) for v in (s, c - a, c - b)]
    g2 = [_signed_lgamma(v) for v in (-s, a, b)]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        l1 = gc + g1[0][0] - g1[1][0] - g1[2][0] + la1
        s1 = sgc * g1[0][1] * g1[1][1] * g1[2][1] * sg1
        l2 = gc + g2[0][0] - g2[1][0] - g2[2][0] + la2 + s * np.log(y)
        s2 = sgc * g2[0][1] * g2[1][1] * g2[2][1] * sg2
        ref = np.maximum(l1, l2)
        tot = s1 * np.exp(l1 - ref) + s2 * np.exp(l2 - ref)
        logabs = ref + np.log(np.abs(tot))
        sign = np.sign(tot)
        mag = (np.exp(l1 - ref) * (er1 + 1e-15) + np.exp(l2 - ref) * (er2 + 1e-15))
        err = mag / np.abs(tot) + 16 * np.finfo(float).eps * (np.abs(a) + np.abs(b) + np.abs(c))
    integer = np.abs(s - np.round(s)) < 1e-9
    return logabs, sign, np.where(integer | ~np.isfinite(err), np.inf, err)


def gauss_2f1_signed(a, b, c, x, policy=None):
    """``(log|2F1|, sign, relerr)`` arrays for 2F1(a, b; c; x), x < 1."""
    policy = _policy(policy)
    a, b, c, x = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(a, b, c, x))
    if np.any(~(x < 1)):
        raise DomainError("gauss_2f1 requires x < 1")
    if np.any((c <= 0) & (c == np.round(c))):
        raise DomainError("gauss_2f1: c must not be a nonpositive integer")
    shape = a.shape
    a, b, c, x = a.ravel(), b.ravel(), c.ravel(), x.ravel()
    n = a.size
    logabs = np.full(n, np.nan)
    sign = np.ones(n)
    err = np.full(n, np.inf)
    tol = _kernel_tol(policy)

    def take(mask, la, sg, er):
        better = mask & (er < err)
        logabs[better] = la[better]
        sign[better] = sg[better]
        err[better] = er[better]

    zero = x == 0
    take(zero, np.zeros(n), np.ones(n), np.zeros(n))

    # Euler integral needs c > (integration parameter) > 0
    use_b = (c > b) & (b > 0)
    use_a = ~use_b & (c > a) & (a > 0)
    euler = ~zero & (use_b | use_a)
    if np.any(euler):
        idx = np.flatnonzero(euler)
        p = np.where(use_b, b, a)[idx]
        q = np.where(use_b, a, b)[idx]
        cc = c[idx]
        li, er = kernels.log_beta_integral(p - 1.0, cc - p - 1.0, -q, 1.0 - x[idx], 0.0, 0.0, rtol=tol)
        la = np.full(n, np.nan)
        ef = np.full(n, np.inf)
        la[idx] = li + sc.gammaln(cc) - sc.gammaln(p) - sc.gammaln(cc - p)
        ef[idx] = er
        take(euler, la, np.ones(n), ef)

    todo = err > policy.rel_tol
    direct = todo & (np.abs(x) <= 0.5)
    if np.any(direct):
        idx = np.flatnonzero(direct)
        la, sg, er = kernels.series_2f1(a[idx], b[idx], c[idx], x[idx], rtol=0.1 * tol,
                                        max_terms=policy.max_terms)
        full = [np.full(n, np.nan), np.ones(n), np.full(n, np.inf)]
        full[0][idx], full[1][idx], full[2][idx] = la, sg, er
        take(direct, *full)

    pfaff = todo & (x < 0) & (x >= -1.0)
    if np.any(pfaff):
        idx = np.flatnonzero(pfaff)
        xx = x[idx]
        la, sg, er = kernels.series_2f1(a[idx], c[idx] - b[idx], c[idx], xx / (xx - 1.0),
                                        rtol=0.1 * tol, max_terms=policy.max_terms)
        full = [np.full(n, np.nan), np.ones(n), np.full(n, np.inf)]
        full[0][idx] = la - a[idx] * np.log1p(-xx)
        full[1][idx], full[2][idx] = sg, er
        take(pfaff, *full)

    conn = (err > policy.rel_tol) & (x > 0.5)
    if np.any(conn):
        idx = np.flatnonzero(conn)
        la, sg, er = _connection_2f1(a[idx], b[idx], c[idx], x[idx], 0.1 * tol, policy.max_terms)
        full = [np.full(n, np.nan), np.ones(n), np.full(n, np.inf)]
        full[0][idx], full[1][idx], full[2][idx] = la, sg, er
        take(conn, *full)

    # large negative x: Pfaff to x/(x-1) in (1/2, 1), then the connection formula
    far = (err > policy.rel_tol) & (x < -1.0)
    if np.any(far):
        idx = np.flatnonzero(far)
        xx = x[idx]
        zp = xx / (xx - 1.0)
        for p, q in ((a, b), (b, a)):
            la, sg, er = _connection_2f1(p[idx], c[idx] - q[idx], c[idx], zp, 0.1 * tol,
                                         policy.max_terms)
            full = [np.full(n, np.nan), np.ones(n), np.full(n, np.inf)]
            full[0][idx] = la - p[idx] * np.log1p(-xx)
            full[1][idx], full[2][idx] = sg, er
            take(far, *full)

    return logabs.reshape(shape), sign.reshape(shape), err.reshape(shape)


def gauss_2f1(a, b, c, x, policy=None):
    """Gauss hypergeometric function 2F1(a, b; c; x) for x < 1."""
    policy = _policy(policy)
    scalar = _is_scalar(a, b, c, x)
    la, sg, er = gauss_2f1_signed(a, b, c, x, policy)
    _check_precision("gauss_2f1", la, sg, er, policy)
    if policy.log_space:
        if np.any(sg < 0):
            raise DomainError("gauss_2f1: log_space requested for a negative value")
        return _out(la, scalar)
    return _out(sg * np.exp(la), scalar)


FUNCTIONS = {
    "ln_gamma": ln_gamma,
    "bessel_j": bessel_j,
    "bessel_k": bessel_k,
    "kummer_1f1": kummer_1f1,
    "tricomi_u": tricomi_u,
    "gauss_2f1": gauss_2f1,
}
