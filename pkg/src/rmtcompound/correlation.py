"""Correlation estimation, ensemble similarity, eigenbasis rotation and aggregation."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateError, InputOutputError, ShapeError, SingularError, ValidationError
from .timeseries_io import EpochPartition, ReturnMatrix, split_epochs

CLIP_FLOOR = 1e-10


def _values(rm):
    return rm.values if isinstance(rm, ReturnMatrix) else np.asarray(rm, dtype=float)


@dataclass(frozen=True)
class CorrMatrix:
    """Symmetric K x K correlation or covariance matrix."""

    entries: np.ndarray
    kind: str = "correlation"

    def __post_init__(self):
        c = np.array(self.entries, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"matrix must be square, got shape {c.shape}")
        if self.kind not in ("correlation", "covariance"):
            raise ValidationError(f"unknown kind {self.kind!r}")
        if not np.allclose(c, c.T, rtol=0, atol=1e-12 * max(1.0, np.abs(c).max())):
            raise ValidationError("matrix is not symmetric")
        c = 0.5 * (c + c.T)
        if self.kind == "correlation":
            if not np.allclose(np.diag(c), 1.0, rtol=0, atol=1e-12):
                raise ValidationError("correlation matrix must have unit diagonal")
            np.fill_diagonal(c, 1.0)
        c.setflags(write=False)
        object.__setattr__(self, "entries", c)

    @property
    def K(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class EpochEnsemble:
    matrices: tuple
    partition: EpochPartition = None

    def __post_init__(self):
        mats = tuple(self.matrices)
        if not mats:
            raise ShapeError("ensemble is empty")
        K, kind = mats[0].K, mats[0].kind
        for m in mats:
            if m.K != K or m.kind != kind:
                raise ShapeError("ensemble matrices must share size and kind")
        if self.partition is not None and self.partition.n_epochs != len(mats):
            raise ShapeError("partition and ensemble sizes differ")
        object.__setattr__(self, "matrices", mats)

    def __len__(self):
        return len(self.matrices)

    def stack(self):
        return np.stack([m.entries for m in self.matrices])


@dataclass(frozen=True)
class SpectralDecomp:
    """Descending eigenvalues and orthonormal eigenvectors (columns of U)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float)
        U = np.array(self.eigenvectors, dtype=float)
        if U.shape != (lam.size, lam.size):
            raise ShapeError("eigenvector matrix does not match eigenvalue count")
        lam.setflags(write=False)
        U.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", U)

    @property
    def K(self):
        return self.eigenvalues.size

    @property
    def logdet(self):
        return float(np.sum(np.log(self.eigenvalues)))

    def matrix(self):
        U, lam = self.eigenvectors, self.eigenvalues
        return (U * lam) @ U.T

    def sqrt(self):
        U, lam = self.eigenvectors, self.eigenvalues
        return (U * np.sqrt(lam)) @ U.T

    @classmethod
    def identity(cls, K):
        return cls(np.ones(K), np.eye(K))

    @classmethod
    def from_matrix(cls, c, clip=False):
        return eigendecompose(c, clip=clip)


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ShapeError("similarity matrix must be square")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def off_diagonal(self):
        n = self.values.shape[0]
        return self.values[~np.eye(n, dtype=bool)]


# ---------------------------------------------------------------- estimation

def sample_correlation(rm, kind="correlation", labels=None):
    """Centered sample covariance (1/T normalization) or correlation."""
    x = _values(rm)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ShapeError("need a K x T matrix with T >= 2")
    xc = x - x.mean(axis=1, keepdims=True)
    cov = xc @ xc.T / x.shape[1]
    if kind == "covariance":
        return CorrMatrix(0.5 * (cov + cov.T), "covariance")
    if kind != "correlation":
        raise ValidationError(f"unknown kind {kind!r}")
    var = np.diag(cov).copy()
    zero = np.flatnonzero(~(var > 0))
    if zero.size:
        k = int(zero[0])
        name = labels[k] if labels else (rm.labels[k] if isinstance(rm, ReturnMatrix) else k)
        raise DegenerateError(f"variable {name} has zero variance", index=k)
    sd = np.sqrt(var)
    corr = cov / np.outer(sd, sd)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return CorrMatrix(np.clip(corr, -1.0, 1.0), "correlation")


def standardize_rows(rm):
    """Subtract row means and divide by row standard deviations."""
    x = _values(rm)
    xc = x - x.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.mean(xc * xc, axis=1, keepdims=True))
    bad = np.flatnonzero(~(sd[:, 0] > 0))
    if bad.size:
        raise DegenerateError(f"row {int(bad[0])} has zero variance", index=int(bad[0]))
    out = xc / sd
    if isinstance(rm, ReturnMatrix):
        return ReturnMatrix(out, rm.labels, rm.timestamps)
    return out


def epoch_ensemble(rm, partition, kind="correlation"):
    mats = [sample_correlation(ep, kind) for ep in split_epochs(rm, partition)]
    return EpochEnsemble(tuple(mats), partition)


def average_correlation(ens):
    """Entrywise mean of the epoch matrices."""
    if not isinstance(ens, EpochEnsemble):
        ens = EpochEnsemble(tuple(ens))
    mean = ens.stack().mean(axis=0)
    kind = ens.matrices[0].kind
    if kind == "correlation":
        np.fill_diagonal(mean, 1.0)
    return CorrMatrix(0.5 * (mean + mean.T), kind)


def _entries(c):
    return c.entries if isinstance(c, CorrMatrix) else np.asarray(c, dtype=float)


def _frobenius_cosine(a, b):
    na = np.sqrt(np.sum(a * a))
    nb = np.sqrt(np.sum(b * b))
    return np.sum(a * b) / (na * nb), na, nb


def cosine_to_average(c, cbar):
    """``tr(C cbar) / sqrt(tr C^2 tr cbar^2)`` for symmetric matrices."""
    a, b = _entries(c), _entries(cbar)
    if a.shape != b.shape:
        raise ShapeError("matrices differ in shape")
    if not (np.any(a) and np.any(b)):
        raise DegenerateError("zero matrix has no direction")
    cos, _, _ = _frobenius_cosine(a, b)
    return float(np.clip(cos, -1.0, 1.0))


def residual_cosine_matrix(ens, cbar=None):
    """Cosines between residuals ``C_i - cbar`` of every pair of epochs."""
    if not isinstance(ens, EpochEnsemble):
        ens = EpochEnsemble(tuple(ens))
    stack = ens.stack()
    mean = _entries(cbar) if cbar is not None else _entries(average_correlation(ens))
    res = (stack - mean).reshape(len(ens), -1)
    norms = np.sqrt(np.sum(res * res, axis=1))
    scale = norms.max() if norms.size else 0.0
    zero = np.flatnonzero(~(norms > 1e-14 * max(scale, 1e-300)))
    if zero.size:
        raise DegenerateError(f"epoch {int(zero[0])} coincides with the average", index=int(zero[0]))
    unit = res / norms[:, None]
    cos = np.clip(unit @ unit.T, -1.0, 1.0)
    cos = 0.5 * (cos + cos.T)
    np.fill_diagonal(cos, 1.0)
    return SimilarityMatrix(cos)


def average_cosines(ens):
    """Cosine of each epoch matrix with the ensemble average."""
    cbar = average_correlation(ens)
    return np.array([cosine_to_average(m, cbar) for m in ens.matrices])


# ------------------------------------------------------------------- spectra

def eigendecompose(c, clip=False, floor=CLIP_FLOOR):
    """Eigen-decomposition with descending eigenvalues and fixed signs.

    Each eigenvector's entry of largest magnitude is made nonnegative.
    With ``clip`` eigenvalues below ``floor * max`` are raised to it;
    without it they raise ``SingularError``.
    """
    a = _entries(c)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("matrix must be square")
    lam, U = np.linalg.eigh(0.5 * (a + a.T))
    order = np.argsort(-lam, kind="stable")
    lam, U = lam[order], U[:, order]
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[pivot, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    U = U * signs
    top = lam[0]
    if not top > 0:
        raise SingularError("matrix has no positive eigenvalue")
    low = lam < floor * top
    if np.any(low):
        if not clip:
            raise SingularError(
                f"{int(low.sum())} eigenvalue(s) below {floor:g} of the largest; smallest {lam[-1]:.3g}")
        lam = np.where(low, floor * top, lam)
    return SpectralDecomp(lam, U)


def rotate_amplitudes(rm, sd):
    """Columns ``U^T r(t)``; labels become ev0..ev(K-1)."""
    x = _values(rm)
    if x.shape[0] != sd.K:
        raise ShapeError(f"data has {x.shape[0]} rows, eigenbasis has {sd.K}")
    out = sd.eigenvectors.T @ x
    if isinstance(rm, ReturnMatrix):
        return ReturnMatrix(out, tuple(f"ev{k}" for k in range(sd.K)), rm.timestamps)
    return out


def aggregate(rotated, eigenvalues):
    """Divide row k by ``sqrt(Lambda_k)`` and concatenate rows."""
    x = _values(rotated)
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.shape != (x.shape[0],):
        raise ShapeError("one eigenvalue per row required")
    if np.any(~(lam > 0)):
        raise SingularError("eigenvalues must be positive to aggregate")
    return (x / np.sqrt(lam)[:, None]).ravel()


def mahalanobis_sq(r, sd):
    """``r^T C^{-1} r`` through the spectral form; r may be (K,) or (n, K)."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != sd.K:
        raise ShapeError(f"vector length {r.shape[-1]} does not match K={sd.K}")
    rb = r @ sd.eigenvectors
    return np.sum(rb * rb / sd.eigenvalues, axis=-1)


# -------------------------------------------------------------------- export

def write_matrix(path, values, labels=None, delimiter=","):
    """Row-major matrix with a header row and an index column."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    labels = list(labels) if labels is not None else [str(i) for i in range(values.shape[1])]
    rows = [delimiter.join(["index"] + labels)]
    for i, row in enumerate(values):
        rows.append(delimiter.join([str(i)] + ["%.17g" % v for v in row]))
    return _write_text(path, "\n".join(rows) + "\n")


def write_columns(path, columns, delimiter=","):
    """Named equal-length columns as delimited text."""
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    length = {len(d) for d in data}
    if len(length) > 1:
        raise ShapeError("columns differ in length")
    lines = [delimiter.join(names)]
    for row in zip(*data):
        lines.append(delimiter.join(_fmt(v) for v in row))
    return _write_text(path, "\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _write_text(path, text):
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc
    return path
