"""Histogram least-squares fits of the rotated univariate densities.

Losses
------
``log``: mean squared difference of log density and log model over bins
with at least one count (empty bins have no logarithm).
``lin``: mean squared difference of density and model over all bins.

Optimizer
---------
Bounded Nelder-Mead in transformed coordinates, started from a fixed
log-spaced lattice. Coordinates are logs of the distance to the lower
bound (``l_rot - 3/2``, ``N``, ``L_rot - (N+2)/2``, ``L_rot - N/2``, ``M``),
so every point the simplex visits is an admissible parameter set.
Starts are independent and may run in parallel; results are merged in
start order so the outcome never depends on scheduling.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import minimize

from .errors import BoundaryWarning, DataError, EvalError, FitError, NumericalError, ParamError
from .model_dists import ModelParams, epoch_rot_univariate_pdf, long_rot_univariate_pdf

L_ROT_MIN = 1.5
L_ROT_MAX = 1e4
N_MIN = 0.1
N_MAX = 1e3
EPS = 1e-3
M_MAX = 1e5
PENALTY = 1e10


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    scale: str = "log"
    n_total: int = 0

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        c = np.asarray(self.counts)
        if e.ndim != 1 or e.size != c.size + 1 or np.any(np.diff(e) <= 0):
            raise DataError("edges must be strictly increasing with one more entry than counts")
        if np.any(c < 0) or np.any(c != np.round(c)):
            raise DataError("counts must be nonnegative integers")
        if self.scale not in ("log", "lin"):
            raise ParamError(f"scale must be log or lin, got {self.scale!r}")
        e.setflags(write=False)
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "counts", c)

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def density(self):
        total = self.counts.sum()
        return self.counts / (total * self.widths) if total else np.zeros(self.counts.size)

    @property
    def density_stderr(self):
        """Binomial standard error of each bin's density."""
        total = self.counts.sum()
        p = self.counts / total
        return np.sqrt(total * p * (1 - p)) / (total * self.widths)

    def with_scale(self, scale):
        return Histogram(self.edges, self.counts, scale, self.n_total)

    def to_dict(self):
        return {"scale": self.scale, "bins": int(self.counts.size),
                "range": [float(self.edges[0]), float(self.edges[-1])],
                "n_total": int(self.n_total), "n_in_range": int(self.counts.sum())}


def build_histogram(samples, scale="log", bins=101, quantile=1e-5, clip=True, bounds=None):
    """Equal-width histogram over a symmetric range.

    The half-width is the larger magnitude of the ``quantile`` and
    ``1 - quantile`` sample quantiles (or the sample extremes when
    ``clip`` is false); ``bounds`` overrides it.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DataError("empty sample")
    if not np.all(np.isfinite(x)):
        raise DataError("samples contain non-finite values")
    if x.size < 10 * bins:
        warnings.warn(f"{x.size} samples for {bins} bins; at least {10 * bins} recommended",
                      stacklevel=2)
    if bounds is not None:
        lo, hi = float(bounds[0]), float(bounds[1])
    else:
        if clip:
            qlo, qhi = np.quantile(x, [quantile, 1.0 - quantile])
        else:
            qlo, qhi = x.min(), x.max()
        half = max(abs(qlo), abs(qhi))
        if half == 0:
            half = max(abs(float(x[0])), 1.0) * 0.5
        lo, hi = -half, half
    if not (hi > lo):
        raise DataError("histogram range is empty")
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    return Histogram(edges, counts, scale, int(x.size))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def model_bin_average(h, pdf, nodes=True):
    """Model density averaged over each bin (4-point Gauss-Legendre).

    With ``nodes=False`` the model is evaluated at the bin centers instead.
    """
    if not nodes:
        xc = h.centers
        return np.asarray(pdf(xc), dtype=float), xc
    mid, half = h.centers, 0.5 * h.widths
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(pdf(x.ravel()), dtype=float).reshape(x.shape)
    return 0.5 * vals @ _GL_WEIGHTS, x


def chi_squared(h, pdf, scale=None, bin_average=True):
    """Scale-matched mean squared residual between histogram and model."""
    scale = scale or h.scale
    model, at = model_bin_average(h, pdf, bin_average)
    bad = ~np.isfinite(model)
    if np.any(bad):
        pts = np.ravel(at[int(np.argmax(bad))])
        j = int(np.argmax(~np.isfinite(np.asarray(pdf(pts), dtype=float))))
        raise EvalError("model density is not finite", abscissa=float(pts[j]))
    dens = h.density
    if scale == "log":
        use = h.counts > 0
        if np.any(model[use] <= 0):
            i = np.flatnonzero(use & (model <= 0))[0]
            raise EvalError("model density vanishes on an occupied bin",
                            abscissa=float(h.centers[i]))
        res = np.log(dens[use]) - np.log(model[use])
    elif scale == "lin":
        res = dens - model
    else:
        raise ParamError(f"scale must be log or lin, got {scale!r}")
    if res.size == 0:
        raise DataError("histogram has no occupied bins")
    return float(np.mean(res * res))


@dataclass
class StartRecord:
    start: dict
    end: dict
    chi2: float
    n_eval: int
    converged: bool

    def to_dict(self):
        return {"start": self.start, "end": self.end, "chi2": self.chi2,
                "n_eval": self.n_eval, "converged": self.converged}


@dataclass
class FitResult:
    params: dict
    chi2: float
    n_eval: int
    starts: list = field(default_factory=list)
    scale: str = "log"
    family: str = ""
    fixed: dict = field(default_factory=dict)
    at_bound: list = field(default_factory=list)

    def to_dict(self):
        return {"family": self.family, "scale": self.scale, "params": self.params,
                "fixed": self.fixed, "chi2": self.chi2, "n_eval": self.n_eval,
                "at_bound": self.at_bound, "starts": [s.to_dict() for s in self.starts]}


# ----------------------------------------------------------- parametrizations

@dataclass(frozen=True)
class _Coord:
    """One fit coordinate: value = lower(others) + exp(t)."""

    name: str
    lower: object
    upper: float
    lattice: tuple

    def low(self, vals):
        return self.lower(vals) if callable(self.lower) else self.lower


def _decode(coords, t):
    vals = {}
    for c, ti in zip(coords, t):
        vals[c.name] = c.low(vals) + math.exp(ti)
    return vals


def _t_bounds(coords, vals_hint=None):
    # bounds in t for each coordinate; dependent lower bounds use the hint
    out = []
    vals = dict(vals_hint or {})
    for c in coords:
        lo = c.low(vals)
        out.append((math.log(EPS), math.log(max(c.upper - lo, 2 * EPS))))
        vals.setdefault(c.name, lo + 1.0)
    return out


def _objective(h, build, coords, fixed, scale):
    n_eval = [0]

    def f(t):
        n_eval[0] += 1
        vals = _decode(coords, t)
        if any(vals[c.name] > c.upper for c in coords):
            return PENALTY
        try:
            pdf = build({**fixed, **vals})
            return chi_squared(h, pdf, scale)
        except (NumericalError, ParamError, EvalError, FloatingPointError, ValueError):
            return PENALTY

    return f, n_eval


def _run(h, build, coords, fixed, scale, starts, family, options, workers):
    lattice = list(product(*[c.lattice for c in coords]))
    if starts is not None:
        lattice = _select_starts(lattice, starts)
    opts = {"xatol": 1e-6, "fatol": 1e-12, "maxiter": 2000, "maxfev": 4000}
    opts.update(options or {})

    def one(point):
        f, n_eval = _objective(h, build, coords, fixed, scale)
        start_vals, t0 = {}, []
        for c, v in zip(coords, point):
            # lattices of coordinates with a moving bound list offsets above it
            off = v if callable(c.lower) else v - c.low(start_vals)
            start_vals[c.name] = c.low(start_vals) + off
            t0.append(math.log(max(off, EPS)))
        t0 = np.array(t0)
        bounds = _t_bounds(coords)
        t0 = np.clip(t0, [b[0] for b in bounds], [b[1] for b in bounds])
        res = minimize(f, t0, method="Nelder-Mead", bounds=bounds, options=dict(opts))
        end = _decode(coords, res.x)
        return StartRecord(start_vals, end, float(res.fun), n_eval[0], bool(res.success)), res

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(one, lattice))
    else:
        runs = [one(pt) for pt in lattice]
    records = [r for r, _ in runs]
    finite = [i for i, r in enumerate(records) if r.chi2 < PENALTY]
    if not finite:
        raise FitError("no start reached an admissible parameter set",
                       trace=[r.to_dict() for r in records])
    best = min(finite, key=lambda i: (records[i].chi2, i))
    rec, res = runs[best]
    bounds = _t_bounds(coords)
    at_bound = [c.name for c, ti, b in zip(coords, res.x, bounds)
                if abs(ti - b[0]) < 1e-3 or abs(ti - b[1]) < 1e-3]
    if at_bound:
        warnings.warn(f"fitted {', '.join(at_bound)} at the search bound", BoundaryWarning,
                      stacklevel=3)
    if not any(r.converged for r in records):
        raise FitError("optimizer did not converge from any start",
                       trace=[r.to_dict() for r in records])
    return FitResult(dict(rec.end), rec.chi2, sum(r.n_eval for r in records), records,
                     scale, family, dict(fixed), at_bound)


def _select_starts(lattice, n):
    if n >= len(lattice):
        return lattice
    idx = np.unique(np.round(np.linspace(0, len(lattice) - 1, n)).astype(int))
    return [lattice[i] for i in idx]


def _geom(lo, hi, n):
    return tuple(float(v) for v in np.geomspace(lo, hi, n))


# ------------------------------------------------------------------ public fits

def fit_epoch(h, Y="A", K=1, starts=8, scale=None, options=None, workers=1):
    """Fit l_rot of the aggregated epoch density (eigenvalue one)."""
    scale = scale or h.scale
    if Y != "A":
        raise ParamError("only the algebraic epoch family has a parameter to fit")
    coords = [_Coord("l_rot", L_ROT_MIN, L_ROT_MAX, _geom(1.6, 200.0, starts))]

    def build(v):
        p = ModelParams("A", "G", 1, 1.0, l=v["l_rot"])
        return lambda x: epoch_rot_univariate_pdf(x, 1.0, p)

    res = _run(h, build, coords, {}, scale, None, "A", options, workers)
    res.params["l"] = res.params["l_rot"] + (K - 1) / 2
    res.fixed = {"K": K}
    return res


def _long_builder(family):
    def build(v):
        p = ModelParams.rotated(family, v["N"], v.get("l_rot"), v.get("L_rot"),
                                m=v.get("m"), M=v.get("M"))
        return lambda x: long_rot_univariate_pdf(x, 1.0, p)
    return build


def fit_long(h, family, l_rot=None, starts=8, scale=None, options=None, workers=1):
    """Fit the reduced long-interval density: N, plus L_rot for GA and AA."""
    family = family.upper()
    scale = scale or h.scale
    fixed = {}
    if family[0] == "A":
        if l_rot is None:
            raise ParamError("epoch family A needs a fixed l_rot")
        if not (2 * l_rot - 3 > 0):
            raise ParamError("2 l_rot - 3 > 0 violated")
        fixed["l_rot"] = float(l_rot)
    coords = []
    if family[1] == "A":
        side = max(2, int(round(math.sqrt(starts))))
        coords.append(_Coord("N", N_MIN, N_MAX, _geom(1.5, 30.0, side)))
        coords.append(_Coord("L_rot", lambda v: (v["N"] + 2) / 2, L_ROT_MAX,
                             _geom(1.0, 300.0, side)))
        n_starts = starts
    else:
        coords.append(_Coord("N", N_MIN, N_MAX, _geom(0.5, 50.0, starts)))
        n_starts = None
    return _run(h, _long_builder(family), coords, fixed, scale, n_starts, family, options,
                workers)


def fit_long_unreduced(h, l_rot, m, N, starts=8, scale=None, options=None, workers=1,
                       lattice=None):
    """Fit (L_rot, M) of the AA density with free ensemble scale M."""
    scale = scale or h.scale
    if starts < 8:
        raise ParamError("the unreduced fit needs at least 8 starts")
    fixed = {"l_rot": float(l_rot), "m": float(m), "N": float(N)}
    side = int(math.ceil(math.sqrt(starts)))
    if lattice is None:
        lattice = (_geom(3.0, 300.0, side), _geom(1.0, 600.0, side))
    coords = [_Coord("L_rot", N / 2 + EPS, L_ROT_MAX, lattice[0]),
              _Coord("M", EPS, M_MAX, lattice[1])]

    def build(v):
        p = ModelParams.rotated("AA", v["N"], v["l_rot"], v["L_rot"], m=v["m"], M=v["M"])
        return lambda x: long_rot_univariate_pdf(x, 1.0, p)

    return _run(h, build, coords, fixed, scale, starts, "AA", options, workers)


@dataclass(frozen=True)
class AmbiguityReport:
    slope: float
    intercept: float
    r2: float
    B: float
    predicted_slope: float
    predicted_intercept: float
    max_line_deviation: float
    chi2_spread: float
    L_rot_spread: float
    M_spread: float
    n: int

    def to_dict(self):
        return dict(self.__dict__)


def converged_starts(result):
    """Starts that converged away from every search bound."""
    out = []
    for s in result.starts:
        if not s.converged or s.chi2 >= PENALTY:
            continue
        coords = dict(s.end)
        if coords.get("N", 1.0) >= N_MAX * (1 - 1e-4) or coords.get("M", 1.0) >= M_MAX * (1 - 1e-4):
            continue
        if coords.get("L_rot", 1.0) >= L_ROT_MAX * (1 - 1e-4) or coords.get("M", 1.0) <= 2 * EPS:
            continue
        out.append(s)
    return out


def _spread(v):
    v = np.asarray(v, dtype=float)
    return float((v.max() - v.min()) / np.mean(v))


def ambiguity_report(points, N):
    """Line fit through converged (L_rot, M) points.

    ``points`` is a list of FitResult, StartRecord or (L_rot, M[, chi2])
    tuples. ``B`` is the least-squares constant in M = B (2 L_rot - N - 2).
    """
    L, M, chi = [], [], []
    for pt in points:
        if isinstance(pt, FitResult):
            L.append(pt.params["L_rot"]); M.append(pt.params["M"]); chi.append(pt.chi2)
        elif isinstance(pt, StartRecord):
            L.append(pt.end["L_rot"]); M.append(pt.end["M"]); chi.append(pt.chi2)
        else:
            L.append(pt[0]); M.append(pt[1]); chi.append(pt[2] if len(pt) > 2 else np.nan)
    L, M, chi = map(lambda a: np.asarray(a, dtype=float), (L, M, chi))
    if L.size < 3:
        raise ParamError("need at least three points")
    if np.ptp(L) == 0:
        raise FitError("all L_rot values coincide; no line can be fitted")
    slope, intercept = np.polyfit(L, M, 1)
    pred = slope * L + intercept
    ss_res = float(np.sum((M - pred) ** 2))
    ss_tot = float(np.sum((M - M.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    x = 2 * L - N - 2
    B = float(np.dot(x, M) / np.dot(x, x))
    dev = float(np.max(np.abs(M - B * x) / M))
    chi_spread = _spread(chi) if np.all(np.isfinite(chi)) and np.mean(chi) > 0 else float("nan")
    return AmbiguityReport(float(slope), float(intercept), r2, B, 2 * B, -B * (N + 2), dev,
                           chi_spread, _spread(L), _spread(M), int(L.size))
