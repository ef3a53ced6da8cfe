"""Two-stage analysis of a return matrix.

Epoch stage: each epoch is standardized row by row, rotated into the
eigenbasis of its own correlation matrix, rescaled by the square roots of
the eigenvalues and pooled; the aggregated epoch density is fitted per
epoch and the tail parameters are averaged (unweighted mean).

Long stage: the full series is standardized, rotated into the eigenbasis
of its correlation matrix, rescaled and pooled, and the long-interval
density is fitted with the epoch parameter held fixed.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import correlation as corr
from .errors import BoundaryWarning, ShapeError
from .fitter import Histogram, build_histogram, fit_epoch, fit_long, model_bin_average
from .model_dists import ModelParams, epoch_rot_univariate_pdf, long_rot_univariate_pdf
from .timeseries_io import partition_epochs, split_epochs

# Fixed reference fits for a K = 479 panel, reprinted in reports and not recomputed.
REFERENCE_EPOCH_MEAN_L = {"log": 241.601, "lin": 241.301}
REFERENCE_LONG_FIT = {"log": {"L": 338.607, "N": 3.123}, "lin": {"L": 339.334, "N": 6.051}}
REFERENCE_K = 479
REFERENCE_AMBIGUITY = ({"N": 3.20, "L_rot": 168.85, "M": 312.68, "chi2": 0.004},
                       {"N": 3.20, "L_rot": 43.79, "M": 77.60, "chi2": 0.004})


def reference_rows():
    rows = []
    for scale in ("log", "lin"):
        l = REFERENCE_EPOCH_MEAN_L[scale]
        fit = REFERENCE_LONG_FIT[scale]
        rows.append({"scale": scale, "K": REFERENCE_K, "mean_l": l,
                     "l_rot": l - (REFERENCE_K - 1) / 2, "L": fit["L"],
                     "L_rot": fit["L"] - (REFERENCE_K - 1) / 2, "N": fit["N"]})
    return rows


def similarity(rm, config):
    """Cosine series, residual-cosine matrix and its off-diagonal histogram."""
    part = partition_epochs(rm, **config.epoch_spec())
    ens = corr.epoch_ensemble(rm, part, config.kind)
    cos_avg = corr.average_cosines(ens)
    sim = corr.residual_cosine_matrix(ens)
    off = sim.off_diagonal()
    counts, edges = np.histogram(off, bins=min(50, max(5, off.size // 4)), range=(-1.0, 1.0))
    return {"partition": part, "cos_to_average": cos_avg, "matrix": sim.values,
            "hist_edges": edges, "hist_counts": counts}


def regime_contrast(matrix, labels):
    """Mean within-group minus mean cross-group off-diagonal similarity.

    Returns ``(difference, z)`` where ``z`` divides the difference by its
    standard error from the two groups' sample variances.
    """
    m = np.asarray(matrix, dtype=float)
    lab = np.asarray(labels)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or lab.shape != (m.shape[0],):
        raise ShapeError("need a square matrix and one label per row")
    iu = np.triu_indices(m.shape[0], 1)
    same = lab[iu[0]] == lab[iu[1]]
    vals = m[iu]
    a, b = vals[same], vals[~same]
    if a.size < 2 or b.size < 2:
        raise ShapeError("need at least two within-group and two cross-group pairs")
    diff = float(a.mean() - b.mean())
    se = float(np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size))
    return diff, (diff / se if se > 0 else float("inf") * np.sign(diff))


def epoch_aggregate(epoch_rm, kind="correlation"):
    x = corr.standardize_rows(epoch_rm)
    sd = corr.eigendecompose(corr.sample_correlation(x, kind), clip=True)
    return corr.aggregate(corr.rotate_amplitudes(x, sd), sd.eigenvalues)


def long_aggregate(rm, kind="correlation"):
    x = corr.standardize_rows(rm)
    sd = corr.eigendecompose(corr.sample_correlation(x, kind), clip=True)
    return corr.aggregate(corr.rotate_amplitudes(x, sd), sd.eigenvalues), sd


@dataclass
class EpochStage:
    fits: list
    l_rot_mean: float
    K: int
    scale: str
    histograms: list = field(default_factory=list)

    @property
    def l_mean(self):
        return self.l_rot_mean + (self.K - 1) / 2


def run_epoch_stage(rm, config, family=None, scale=None):
    family = (family or config.family).upper()
    scale = scale or config.scale
    part = partition_epochs(rm, **config.epoch_spec())
    if family[0] == "G":
        return EpochStage([], float("nan"), rm.K, scale)
    fits, hists = [], []
    for ep in split_epochs(rm, part):
        sample = epoch_aggregate(ep, config.kind)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            h = build_histogram(sample, scale, config.bins, config.quantile, config.clip)
        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always", BoundaryWarning)
            fits.append(fit_epoch(h, "A", rm.K, starts=config.starts, scale=scale))
        hists.append(h)
    mean = float(np.mean([f.params["l_rot"] for f in fits]))
    return EpochStage(fits, mean, rm.K, scale, hists)


@dataclass
class LongStage:
    fit: object
    histogram: object
    family: str
    l_rot: float
    sd: object


def run_long_stage(rm, config, l_rot=None, family=None, scale=None):
    family = (family or config.family).upper()
    scale = scale or config.scale
    sample, sd = long_aggregate(rm, config.kind)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        h = build_histogram(sample, scale, config.bins, config.quantile, config.clip)
    fit = fit_long(h, family, l_rot=l_rot if family[0] == "A" else None,
                   starts=config.starts, scale=scale)
    return LongStage(fit, h, family, l_rot, sd)


def _block_values(block):
    x = np.asarray(getattr(block, "values", block), dtype=float)
    if x.ndim != 2:
        raise ShapeError("each block must be a K x T matrix")
    return x


def run_long_stage_streamed(blocks, config, l_rot=None, family=None, scale=None):
    """Long stage for a series supplied in consecutive time blocks.

    ``blocks`` is a zero-argument callable returning an iterable of K x T
    blocks (arrays or ReturnMatrix); it is iterated twice. The first pass
    accumulates the full-series means and correlation, the second
    standardizes, rotates and aggregates each block into one histogram
    whose range comes from the first block. The result matches
    ``run_long_stage`` on the concatenated series up to that range choice.
    """
    family = (family or config.family).upper()
    scale = scale or config.scale
    n, total, outer = 0, None, None
    for block in blocks():
        x = _block_values(block)
        if total is None:
            total, outer = np.zeros(x.shape[0]), np.zeros((x.shape[0], x.shape[0]))
        elif x.shape[0] != total.size:
            raise ShapeError("blocks disagree on K")
        n += x.shape[1]
        total += x.sum(axis=1)
        outer += x @ x.T
    if total is None or n < 2:
        raise ShapeError("need at least two observations")
    mean = total / n
    cov = outer / n - np.outer(mean, mean)
    std = np.sqrt(np.diag(cov))
    if np.any(~(std > 0)):
        raise ShapeError("a series has zero variance")
    c = cov / np.outer(std, std)
    sd = corr.eigendecompose(0.5 * (c + c.T), clip=True)
    h = None
    counts = None
    for block in blocks():
        x = (_block_values(block) - mean[:, None]) / std[:, None]
        sample = corr.aggregate(corr.rotate_amplitudes(x, sd), sd.eigenvalues)
        if h is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                h = build_histogram(sample, scale, config.bins, config.quantile, config.clip)
            counts = h.counts.copy()
        else:
            counts += np.histogram(sample, bins=h.edges)[0]
    h = Histogram(h.edges, counts, scale, n * sd.K)
    fit = fit_long(h, family, l_rot=l_rot if family[0] == "A" else None,
                   starts=config.starts, scale=scale)
    return LongStage(fit, h, family, l_rot, sd)


def overlay(h, pdf):
    """Columns for plotting a histogram against a model density."""
    model, _ = model_bin_average(h, pdf)
    return {"x": h.centers, "density": h.density, "stderr": h.density_stderr,
            "model_bin_average": model, "model_center": np.asarray(pdf(h.centers), dtype=float)}


def epoch_model(l_rot):
    p = ModelParams("A", "G", 1, 1.0, l=l_rot)
    return lambda x: epoch_rot_univariate_pdf(x, 1.0, p)


def long_model(family, params, l_rot=None):
    p = ModelParams.rotated(family, params["N"], l_rot if family[0] == "A" else None,
                            params.get("L_rot"), m=params.get("m"), M=params.get("M"))
    return lambda x: long_rot_univariate_pdf(x, 1.0, p)
