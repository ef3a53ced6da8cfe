"""Model densities: epoch, long-interval and linear-combination forms.

Every density here is an elliptical law whose dependence on the
amplitudes runs through ``q = r^T C^{-1} r`` alone. Conditionally on a
positive scalar S the vector is Gaussian with covariance ``S C``; the
families differ only in the law of S:

=====  ==========================================================
epoch  G: S = 1.  A: S = (b/2) / g_alpha
long   S = c * A_a / (product of optional g_alpha, g_beta)
=====  ==========================================================

where ``g_s`` denotes a Gamma(s, 1) variable, ``a = N/2``,
``alpha = l - K/2``, ``beta = L - (K+N-1)/2``, ``b = 2l-K-2`` (or m),
``aL = 2L-K-N-1`` (or M), and ``c`` is 2/N (GG), aL/N (GA), b/N (AG)
or b*aL/(2N) (AA). Integrating S out gives, with ``w = q/(2c)`` and
dimension I,

* no mixing: Gaussian
* one Gamma divisor only: Student form
* numerator only: Bessel K of order ``a - I/2``
* numerator and one divisor: Tricomi U
* numerator and two divisors: Gauss 2F1 at ``1 - w``

so the rotated univariates (I = 1), the multivariate forms (I = K) and
the linear combinations (any I) share one code path. For a general
positive definite D (integer N) the numerator becomes a weighted sum of
Gamma variables; it is expanded as a positive mixture of Gamma(N/2 + k)
laws (chi-square series), each term of which is one of the closed forms.

Densities are computed in log space and exponentiated once.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from . import kernels, specfun
from .correlation import SpectralDecomp, mahalanobis_sq
from .errors import ParamError, PrecisionError, RankError, ShapeError

FAMILIES = ("GG", "GA", "AG", "AA")
DEFAULT_TOL = 1e-10
_LOG_2PI = math.log(2.0 * math.pi)
_SERIES_TAIL = 1e-15
_SERIES_MAX = 5000


@dataclass(frozen=True)
class ModelParams:
    """Family tags and scalar parameters of the compound model.

    ``m`` and ``M`` switch the epoch and ensemble scales to free
    (unreduced) parameters; by default they are tied to the tail powers
    through ``b = 2l-K-2`` and ``aL = 2L-K-N-1``, which makes
    ``<r r^T> = C``.
    """

    Y: str
    Yp: str
    K: int
    N: float = 1.0
    l: Optional[float] = None
    L: Optional[float] = None
    m: Optional[float] = None
    M: Optional[float] = None
    I: Optional[int] = None
    d_eigs: Optional[tuple] = None

    def __post_init__(self):
        if self.Y not in ("G", "A") or self.Yp not in ("G", "A"):
            raise ParamError(f"family tags must be G or A, got {self.Y!r}, {self.Yp!r}")
        if int(self.K) != self.K or self.K < 1:
            raise ParamError("K must be a positive integer")
        object.__setattr__(self, "K", int(self.K))
        if not (self.N > 0):
            raise ParamError("N > 0 required")
        K, N = self.K, self.N
        if self.Y == "A":
            if self.l is None:
                raise ParamError("epoch family A needs l")
            if not (self.l > K / 2):
                raise ParamError(f"l > K/2 violated (l={self.l}, K/2={K / 2})")
            if self.m is None and not (2 * self.l - K - 2 > 0):
                raise ParamError(f"2l - K - 2 > 0 violated (l={self.l}, K={K})")
            if self.m is not None and not (self.m > 0):
                raise ParamError("m > 0 required")
        if self.Yp == "A":
            if self.L is None:
                raise ParamError("ensemble family A needs L")
            if not (self.L > (K + N - 1) / 2):
                raise ParamError(f"L > (K+N-1)/2 violated (L={self.L}, bound={(K + N - 1) / 2})")
            if self.M is None and not (2 * self.L - K - N - 1 > 0):
                raise ParamError(f"2L - K - N - 1 > 0 violated (L={self.L})")
            if self.M is not None and not (self.M > 0):
                raise ParamError("M > 0 required")
        if self.I is not None and not (1 <= int(self.I) <= K):
            raise ParamError(f"combination dimension I must lie in [1, K], got {self.I}")
        if self.d_eigs is not None:
            d = tuple(float(v) for v in self.d_eigs)
            if N != int(N) or len(d) != int(N):
                raise ParamError("d_eigs needs integer N and exactly N eigenvalues")
            if any(not (v > 0) for v in d):
                raise ParamError("d_eigs must be positive")
            object.__setattr__(self, "d_eigs", d)

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_family(cls, family, K, N=1.0, l=None, L=None, **kw):
        family = family.upper()
        if family not in FAMILIES:
            raise ParamError(f"unknown family {family!r}")
        return cls(family[0], family[1], K, N, l, L, **kw)

    @classmethod
    def rotated(cls, family, N=1.0, l_rot=None, L_rot=None, K=1, **kw):
        """Build from the rotated parameters ``l_rot``, ``L_rot``."""
        shift = (K - 1) / 2
        l = None if l_rot is None else l_rot + shift
        L = None if L_rot is None else L_rot + shift
        return cls.from_family(family, K, N, l, L, **kw)

    # -- derived quantities -------------------------------------------------
    @property
    def family(self):
        return self.Y + self.Yp

    @property
    def l_rot(self):
        return None if self.l is None else self.l - (self.K - 1) / 2

    @property
    def L_rot(self):
        return None if self.L is None else self.L - (self.K - 1) / 2

    @property
    def unreduced(self):
        return self.m is not None or self.M is not None

    @property
    def alpha(self):
        return self.l - self.K / 2

    @property
    def beta(self):
        return self.L - (self.K + self.N - 1) / 2

    @property
    def epoch_scale(self):
        """b = 2l - K - 2 (reduced) or m."""
        return self.m if self.m is not None else 2 * self.l - self.K - 2

    @property
    def ensemble_scale(self):
        """aL = 2L - K - N - 1 (reduced) or M."""
        return self.M if self.M is not None else 2 * self.L - self.K - self.N - 1

    @property
    def markovian(self):
        return self.d_eigs is None or all(v == 1.0 for v in self.d_eigs)

    def with_(self, **changes):
        d = {k: getattr(self, k) for k in
             ("Y", "Yp", "K", "N", "l", "L", "m", "M", "I", "d_eigs")}
        d.update(changes)
        return ModelParams(**d)


@dataclass(frozen=True)
class CombinationSpec:
    """Coefficient matrix V (K x I) and ``ctilde = V^T C V``."""

    V: np.ndarray
    ctilde: np.ndarray

    @property
    def I(self):
        return self.ctilde.shape[0]


# ------------------------------------------------------------ scale mixtures

def _mixture(p, scope):
    """Return (terms, divisors): terms = [(log weight, a, c)], a None for epoch."""
    if scope == "epoch":
        if p.Y == "G":
            return [(0.0, None, 1.0)], ()
        return [(0.0, None, p.epoch_scale / 2.0)], (p.alpha,)
    N = p.N
    if p.family == "GG":
        c, div = 2.0 / N, ()
    elif p.family == "GA":
        c, div = p.ensemble_scale / N, (p.beta,)
    elif p.family == "AG":
        c, div = p.epoch_scale / N, (p.alpha,)
    else:
        c, div = p.epoch_scale * p.ensemble_scale / (2.0 * N), (p.alpha, p.beta)
    if p.markovian:
        return [(0.0, N / 2.0, c)], div
    d = np.asarray(p.d_eigs)
    base = d.min()
    return [(lw, N / 2.0 + k, c * base) for k, lw in enumerate(_chi2_series_weights(d / base))], div


def _chi2_series_weights(ratios):
    """Log weights w_k with sum_i r_i g_i^2 ~ sum_k w_k chi2(n + 2k), r_i >= 1."""
    gam = 1.0 - 1.0 / np.asarray(ratios, dtype=float)
    c = [float(np.exp(-0.5 * np.sum(np.log(ratios))))]
    g = []
    total = c[0]
    k = 0
    while 1.0 - total > _SERIES_TAIL and k < _SERIES_MAX:
        k += 1
        g.append(0.5 * float(np.sum(gam ** k)))
        ck = sum(g[j - 1] * c[k - j] for j in range(1, k + 1)) / k
        c.append(ck)
        total += ck
    with np.errstate(divide="ignore"):
        return list(np.log(np.asarray(c)))


def _check(name, logval, err, tol):
    floor = 16 * np.finfo(float).eps * (1.0 + np.abs(np.nan_to_num(logval)))
    bad = ~(err <= np.maximum(tol, floor))
    if np.any(bad):
        raise PrecisionError(f"{name}: estimated relative error {float(np.max(err)):.3g}",
                             value=np.exp(logval), error=float(np.max(err)))


def _log_kernel(q, I, a, c, div, tol):
    """log density of the I-dimensional scale mixture at q (unit determinant)."""
    q = np.asarray(q, dtype=float)
    half = I / 2.0
    base = -half * (_LOG_2PI + math.log(c))
    w = q / (2.0 * c)
    if a is None:
        if not div:
            return base - w
        (bt,) = div
        return base + gammaln(bt + half) - gammaln(bt) - (bt + half) * np.log1p(w)

    nu = a - half
    out = np.empty_like(w)
    zero = w == 0
    pos = ~zero
    if not div:
        if np.any(pos):
            wp = w[pos]
            out[pos] = (math.log(2.0) - gammaln(a) + 0.5 * nu * np.log(wp)
                        + specfun.log_bessel_k(nu, 2.0 * np.sqrt(wp)))
        if np.any(zero):
            out[zero] = gammaln(nu) - gammaln(a) if nu > 0 else np.inf
        return base + out

    if len(div) == 1:
        (bt,) = div
        pre = gammaln(bt + half) + gammaln(a + bt) - gammaln(bt) - gammaln(a)
        if np.any(pos):
            lu, err = specfun.log_tricomi_u_err(bt + half, half - a + 1.0, w[pos])
            _check("tricomi_u", lu, err, tol)
            out[pos] = lu
        if np.any(zero):
            out[zero] = gammaln(nu) - gammaln(a + bt) if nu > 0 else np.inf
        return base + pre + out

    al, bt = div
    # 2F1(al + I/2, bt + I/2; al + bt + a + I/2; 1 - w) by its Euler integral
    cf = al + bt + a + half
    pre = (gammaln(al + half) + gammaln(bt + half) + gammaln(al + a) + gammaln(bt + a)
           - gammaln(al) - gammaln(bt) - gammaln(a) - gammaln(cf))
    pf = bt + half
    ok = pos | (nu > 0)
    if np.any(ok):
        li, err = kernels.log_beta_integral(pf - 1.0, cf - pf - 1.0, -(al + half), w[ok], 0.0, 0.0,
                                            rtol=max(0.1 * tol, 1e-14))
        l2f1 = li + gammaln(cf) - gammaln(pf) - gammaln(cf - pf)
        _check("gauss_2f1", l2f1, err, tol)
        out[ok] = l2f1
    out[~ok] = np.inf
    return base + pre + out


def log_radial_density(q, I, p, scope="long", tol=DEFAULT_TOL):
    """log density in dimension I at Mahalanobis value q, for det(C) = 1."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ParamError("Mahalanobis values must be nonnegative")
    terms, div = _mixture(p, scope)
    flat = q.ravel()
    if len(terms) == 1:
        _, a, c = terms[0]
        return _log_kernel(flat, I, a, c, div, tol).reshape(q.shape)
    parts = np.array([lw + _log_kernel(flat, I, a, c, div, tol) for lw, a, c in terms])
    return logsumexp(parts, axis=0).reshape(q.shape)


# ------------------------------------------------------------------ helpers

def _validate_lambda(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise ParamError("eigenvalue Lambda_k must be positive")
    return lam


def _univariate(x, lam, p, scope, log, tol):
    lam = _validate_lambda(lam)
    x = np.asarray(x, dtype=float)
    q = x * x / lam
    val = log_radial_density(q, 1, p, scope, tol) - 0.5 * np.log(lam)
    return val if log else np.exp(val)


def _finish(val, log):
    val = np.asarray(val, dtype=float)
    out = val if log else np.exp(val)
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------ epoch

def epoch_pdf(r, sd, p, log=False, tol=DEFAULT_TOL):
    """Epoch density of the K-vector(s) r for epoch matrix ``sd``."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != p.K or sd.K != p.K:
        raise ShapeError("dimension mismatch between r, eigenbasis and K")
    q = mahalanobis_sq(r, sd)
    return _finish(log_radial_density(q, p.K, p, "epoch", tol) - 0.5 * sd.logdet, log)


def epoch_rot_univariate_pdf(x, lam, p, log=False, tol=DEFAULT_TOL):
    """Epoch density of one rotated amplitude with eigenvalue ``lam``."""
    if p.Y == "A" and not (2 * p.l_rot - 3 > 0) and p.m is None:
        raise ParamError("2 l_rot - 3 > 0 violated")
    return _finish(_univariate(x, lam, p, "epoch", True, tol), log)


# ------------------------------------------------------------ long interval

def long_multivariate_pdf(r, sd, p, log=False, tol=DEFAULT_TOL):
    """Long-interval density of the K-vector(s) r for average matrix ``sd``."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != p.K or sd.K != p.K:
        raise ShapeError("dimension mismatch between r, eigenbasis and K")
    q = mahalanobis_sq(r, sd)
    return _finish(log_radial_density(q, p.K, p, "long", tol) - 0.5 * sd.logdet, log)


def long_rot_univariate_pdf(x, lam, p, log=False, tol=DEFAULT_TOL):
    """Long-interval density of one rotated amplitude with eigenvalue ``lam``."""
    if p.Yp == "A" and p.M is None and not (2 * p.L_rot - p.N - 2 > 0):
        raise ParamError("2 L_rot - N - 2 > 0 violated")
    if p.Y == "A" and p.m is None and not (2 * p.l_rot - 3 > 0):
        raise ParamError("2 l_rot - 3 > 0 violated")
    return _finish(_univariate(x, lam, p, "long", True, tol), log)


# ---------------------------------------------------------- combinations

def build_combination(V, sd):
    """``CombinationSpec`` for coefficient matrix V (K x I)."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != sd.K:
        raise ShapeError(f"V has {V.shape[0]} rows, C is {sd.K} x {sd.K}")
    sv = np.linalg.svd(V, compute_uv=False)
    smallest = float(sv.min())
    if V.shape[1] > V.shape[0] or smallest <= 1e-12 * max(float(sv.max()), 1e-300):
        raise RankError(f"V lacks full column rank (smallest singular value {smallest:.3g})",
                        smallest_singular_value=smallest)
    W = sd.eigenvectors.T @ V
    ct = (W.T * sd.eigenvalues) @ W
    ct = 0.5 * (ct + ct.T)
    try:
        np.linalg.cholesky(ct)
    except np.linalg.LinAlgError:
        raise RankError("V^T C V is not positive definite", smallest_singular_value=smallest) from None
    return CombinationSpec(V, ct)


def _comb_q(s, ct):
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != ct.shape[0]:
        raise ShapeError(f"s has length {s.shape[-1]}, expected {ct.shape[0]}")
    chol = np.linalg.cholesky(ct)
    flat = s.reshape(-1, ct.shape[0]).T
    z = np.linalg.solve(chol, flat)
    q = np.sum(z * z, axis=0).reshape(s.shape[:-1])
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return q, logdet


def comb_multivariate_pdf(s, spec, p, log=False, tol=DEFAULT_TOL):
    """Long-interval density of ``s = V^T r`` (length I)."""
    if p.I is not None and p.I != spec.I:
        raise ShapeError(f"params say I={p.I}, combination has I={spec.I}")
    if spec.I > p.K:
        raise ShapeError("I must not exceed K")
    q, logdet = _comb_q(s, spec.ctilde)
    return _finish(log_radial_density(q, spec.I, p, "long", tol) - 0.5 * logdet, log)


def comb_bivariate_aa_pdf(s1, s2, spec, p, log=False, tol=DEFAULT_TOL):
    """Bivariate AA density written out with the explicit 2 x 2 inverse."""
    if spec.I != 2:
        raise ShapeError("bivariate form needs I = 2")
    if p.family != "AA":
        raise ParamError("bivariate closed form is for the AA family")
    if not p.markovian:
        raise ParamError("bivariate closed form assumes D = 1")
    c11, c12, c22 = spec.ctilde[0, 0], spec.ctilde[0, 1], spec.ctilde[1, 1]
    det = c11 * c22 - c12 * c12
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    q = (c22 * s1 * s1 - 2.0 * c12 * s1 * s2 + c11 * s2 * s2) / det
    K, N, l, L = p.K, p.N, p.l, p.L
    b, aL = p.epoch_scale, p.ensemble_scale
    pre = (gammaln(1 - K / 2 + l) + gammaln(l - (K - N) / 2) + gammaln(1.5 + L - (K + N) / 2)
           + gammaln(L - (K - 1) / 2)
           - gammaln(l - K / 2) - gammaln(L - (K + N - 1) / 2) - gammaln(N / 2)
           - gammaln(L + l - K + 1.5)
           - 0.5 * math.log(det * (math.pi * b * aL / N) ** 2))
    la, sg, err = specfun.gauss_2f1_signed(1 - K / 2 + l, 1.5 + L - (K + N) / 2, L + l - K + 1.5,
                                           1.0 - N * q / (b * aL),
                                           specfun.EvalPolicy(rel_tol=min(max(tol, 1e-14), 1e-6)))
    _check("gauss_2f1", la, err, tol)
    return _finish(pre + la, log)


# ------------------------------------------------------ coefficient vectors

def eigen_rotation_vectors(sd, indices, psi=math.pi / 4, phi=math.pi / 7):
    """Two unit vectors mixing eigenvectors i, j and i, k by angles psi, phi."""
    i, j, k = indices
    U = sd.eigenvectors
    v1 = math.cos(psi) * U[:, i] + math.sin(psi) * U[:, j]
    v2 = math.cos(phi) * U[:, i] + math.sin(phi) * U[:, k]
    return np.column_stack([v1, v2])


def eigen_split_vectors(sd, index):
    """Eigenvector ``index`` cut into its first floor(K/2) and remaining entries.

    Each half is padded with zeros and normalized to unit length.
    """
    u = np.array(sd.eigenvectors[:, index], dtype=float)
    h = sd.K // 2
    v1 = np.where(np.arange(sd.K) < h, u, 0.0)
    v2 = u - v1
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 == 0 or n2 == 0:
        raise RankError("eigenvector half is identically zero", smallest_singular_value=0.0)
    return np.column_stack([v1 / n1, v2 / n2])


def univariate_pdf(x, lam, p, scope="long", log=False, tol=DEFAULT_TOL):
    """Dispatch to the epoch or long-interval rotated univariate."""
    if scope == "epoch":
        return epoch_rot_univariate_pdf(x, lam, p, log, tol)
    return long_rot_univariate_pdf(x, lam, p, log, tol)


def tail_power(p, scope="long"):
    """Exponent t with pdf(x) ~ x^(-t) for the rotated univariate (inf if Gaussian-tailed)."""
    powers = []
    if p.Y == "A":
        powers.append(2 * p.alpha + 1)
    if scope == "long" and p.Yp == "A":
        powers.append(2 * p.beta + 1)
    return min(powers) if powers else np.inf
