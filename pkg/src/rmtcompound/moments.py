"""Moments of the squared Mahalanobis distance ``q = r^T C^{-1} r``.

With ``r = C^{1/2} z sqrt(S)`` the moments factor as
``<q^nu> = 2^nu Gamma(K/2 + nu) / Gamma(K/2) * <S^nu>``, and ``<S^nu>`` is a
product of Gamma ratios, one per factor of S. None of this depends on C.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, poch

from .correlation import mahalanobis_sq
from .errors import DataError, ExistenceError, ParamError, UnsupportedError


@dataclass(frozen=True)
class MomentSpec:
    nu: float
    scope: str = "long"

    def __post_init__(self):
        if not (self.nu > 0):
            raise ParamError("moment order must be positive")
        if self.scope not in ("epoch", "long"):
            raise ParamError(f"scope must be epoch or long, got {self.scope!r}")


class EmpiricalMoment(NamedTuple):
    value: float
    stderr: float
    n: int


def _require(nu, bound, label):
    if not (nu < bound):
        raise ExistenceError(f"moment of order {nu} needs nu < {label} = {bound:.6g}")


def _log_poch(x, nu):
    """log Gamma(x + nu) / Gamma(x) without differencing large log-gammas."""
    r = poch(x, nu)
    if 0.0 < r < math.inf:
        return math.log(r)
    return gammaln(x + nu) - gammaln(x)


def _log_scale_moment(nu, p, scope):
    """log <S^nu> for the scale variable of the given scope."""
    out = 0.0
    if scope == "long":
        a = p.N / 2.0
        out += _log_poch(a, nu)
    if p.Y == "A":
        _require(nu, p.alpha, "l - K/2")
        out -= _log_poch(p.alpha - nu, nu)
    if scope == "long" and p.Yp == "A":
        _require(nu, p.beta, "L - (K+N-1)/2")
        out -= _log_poch(p.beta - nu, nu)
    # overall scale c of S
    if scope == "epoch":
        c = p.epoch_scale / 2.0 if p.Y == "A" else 1.0
    else:
        c = 1.0 / p.N
        c *= p.epoch_scale if p.Y == "A" else 2.0
        c *= p.ensemble_scale if p.Yp == "A" else 2.0
        c /= 2.0
    return out + nu * math.log(c)


def _moment(spec, p):
    half = p.K / 2.0
    lg = spec.nu * math.log(2.0) + _log_poch(half, spec.nu)
    return math.exp(lg + _log_scale_moment(spec.nu, p, spec.scope))


def epoch_moment(spec, p):
    """``<q^nu>`` for the epoch distribution of family ``p.Y``."""
    return _moment(MomentSpec(spec.nu, "epoch"), p)


def long_moment(spec, p):
    """``<q^nu>`` for the long-interval distribution (D = 1 only)."""
    if not p.markovian:
        raise UnsupportedError("long-interval moments are available for D = 1 only")
    return _moment(MomentSpec(spec.nu, "long"), p)


def moment(spec, p):
    return epoch_moment(spec, p) if spec.scope == "epoch" else long_moment(spec, p)


def moment_ratio_q2(p, scope="long"):
    """``Q2 = <q^2> / <q>^2`` in closed form.

    Each factor of S contributes independently: ``(K+2)/K`` from the
    Gaussian direction, ``(N+2)/N`` from the ensemble numerator and
    ``(s-1)/(s-2)`` from each Gamma divisor of shape s.
    """
    K = p.K
    q = (K + 2.0) / K
    if p.Y == "A":
        _require(2.0, p.alpha, "l - K/2")
        q *= (p.alpha - 1.0) / (p.alpha - 2.0)
    if scope == "long":
        if not p.markovian:
            raise UnsupportedError("long-interval moments are available for D = 1 only")
        q *= (p.N + 2.0) / p.N
        if p.Yp == "A":
            _require(2.0, p.beta, "L - (K+N-1)/2")
            q *= (p.beta - 1.0) / (p.beta - 2.0)
    elif scope != "epoch":
        raise ParamError(f"scope must be epoch or long, got {scope!r}")
    return q


def empirical_moment(samples, sd, nu):
    """Sample mean of ``q^nu`` and its standard error."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise DataError("no samples")
    stat = mahalanobis_sq(x, sd) ** nu
    n = stat.shape[0]
    se = float(np.std(stat, ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return EmpiricalMoment(float(np.mean(stat)), se, n)


def empirical_ratio_q2(samples, sd):
    """Sample Q2 with a delta-method standard error."""
    x = np.asarray(samples, dtype=float)
    q = mahalanobis_sq(x, sd)
    n = q.shape[0]
    m1, m2 = float(np.mean(q)), float(np.mean(q * q))
    ratio = m2 / (m1 * m1)
    # gradient of m2/m1^2 with respect to (m1, m2)
    g = np.array([-2.0 * m2 / m1 ** 3, 1.0 / (m1 * m1)])
    cov = np.cov(np.vstack([q, q * q])) / n
    return EmpiricalMoment(ratio, float(math.sqrt(g @ cov @ g)), n)
