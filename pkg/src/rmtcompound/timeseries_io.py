"""Amplitude matrices, epoch partitions, run configuration and text I/O."""

import configparser
import csv
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (DataError, InputOutputError, ParseError, PartitionError,
                     ShapeError, ValidationError)

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class ReturnMatrix:
    """K x T amplitudes: one row per variable, one column per time step."""

    values: np.ndarray
    labels: tuple
    timestamps: Optional[tuple] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ShapeError(f"values must be 2-D, got shape {values.shape}")
        K, T = values.shape
        if K < 1 or T < 2:
            raise ShapeError(f"need K >= 1 and T >= 2, got K={K}, T={T}")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            r, c = (int(v) for v in bad[0])
            raise DataError(f"non-finite value at variable {r}, step {c}", row=r, col=c)
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != K:
            raise ShapeError(f"{len(labels)} labels for {K} rows")
        if len(set(labels)) != K:
            raise ValidationError("labels must be unique")
        if self.timestamps is not None:
            stamps = tuple(self.timestamps)
            if len(stamps) != T:
                raise ShapeError(f"{len(stamps)} timestamps for {T} columns")
            object.__setattr__(self, "timestamps", stamps)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def K(self):
        return self.values.shape[0]

    @property
    def T(self):
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, labels=None, prefix="v"):
        values = np.asarray(values, dtype=float)
        if labels is None:
            labels = [f"{prefix}{k}" for k in range(values.shape[0])]
        return cls(values, tuple(labels))

    def columns(self, start, end):
        """Sub-matrix of columns [start, end) with the same labels."""
        stamps = None if self.timestamps is None else self.timestamps[start:end]
        return ReturnMatrix(self.values[:, start:end], self.labels, stamps)


@dataclass(frozen=True)
class EpochPartition:
    """Contiguous, equal-length column ranges ``[start, end)``."""

    boundaries: tuple
    dropped: int = 0

    def __post_init__(self):
        b = tuple((int(s), int(e)) for s, e in self.boundaries)
        if not b:
            raise PartitionError("partition has no epochs")
        if b[0][0] != 0:
            raise PartitionError("first epoch must start at column 0")
        for (s0, e0), (s1, e1) in zip(b, b[1:]):
            if e0 != s1:
                raise PartitionError("epochs must be contiguous and non-overlapping")
        if any(e <= s for s, e in b):
            raise PartitionError("epochs must be non-empty")
        object.__setattr__(self, "boundaries", b)

    @property
    def n_epochs(self):
        return len(self.boundaries)

    @property
    def length(self):
        s, e = self.boundaries[0]
        return e - s

    @property
    def retained(self):
        return self.boundaries[-1][1]


def partition_epochs(rm, n=None, length=None, full_rank=False):
    """Split the columns of ``rm`` into equal epochs.

    Give either the epoch count ``n`` or the epoch ``length``. Trailing
    columns that do not fill an epoch are dropped and counted in
    ``EpochPartition.dropped``. With ``full_rank=True`` every epoch must
    hold at least K + 1 columns, otherwise at least 2.
    """
    T = rm.T if hasattr(rm, "T") else int(rm)
    K = rm.K if hasattr(rm, "K") else 1
    if (n is None) == (length is None):
        raise PartitionError("give exactly one of n or length")
    if n is not None:
        n = int(n)
        if n < 1:
            raise PartitionError("epoch count must be >= 1")
        length = T // n
    else:
        length = int(length)
        if length < 2:
            raise PartitionError("epoch length must be >= 2", minimum=2)
        n = T // length
    floor = K + 1 if full_rank else 2
    if length < floor or n < 1:
        raise PartitionError(
            f"epoch length {length} is below the required minimum {floor}", minimum=floor)
    bounds = tuple((i * length, (i + 1) * length) for i in range(n))
    return EpochPartition(bounds, dropped=T - n * length)


def split_epochs(rm, partition):
    """List of ReturnMatrix, one per epoch."""
    return [rm.columns(s, e) for s, e in partition.boundaries]


# ------------------------------------------------------------------ file I/O

def _delimiter(path, fmt):
    fmt = fmt or ("tsv" if str(path).lower().endswith((".tsv", ".tab")) else "csv")
    if fmt not in ("csv", "tsv"):
        raise ValidationError(f"unknown format {fmt!r}")
    return "\t" if fmt == "tsv" else ","


_TIME_KEYS = ("time", "timestamp", "t", "date")
_LABEL_KEYS = ("label", "variable", "name", "")


def load_returns(path, fmt=None, rows="time"):
    """Read a delimited file with a one-line header.

    ``rows="time"``: one time step per line, one column per variable; a
    first column named time/timestamp/t/date holds the timestamps.
    ``rows="variable"``: one variable per line and the header holds the
    time tags; a first column headed label/variable/name (or blank) holds
    the variable labels.
    """
    if rows not in ("time", "variable"):
        raise ValidationError(f"rows must be 'time' or 'variable', got {rows!r}")
    delim = _delimiter(path, fmt)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = list(csv.reader(fh, delimiter=delim))
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in lines if ln and any(c.strip() for c in ln)]
    if len(lines) < 2:
        raise ParseError(f"{path}: need a header and at least one data line", row=0)
    header = [h.strip() for h in lines[0]]
    body = lines[1:]
    width = len(header)
    for i, ln in enumerate(body):
        if len(ln) != width:
            raise ParseError(f"{path}: data row {i} has {len(ln)} cells, header has {width}", row=i)

    keys = _TIME_KEYS if rows == "time" else _LABEL_KEYS
    lead = header[0].lower() in keys
    first = 1 if lead else 0
    try:
        grid = np.array([ln[first:] for ln in body], dtype=float)
        ok = bool(np.all(np.isfinite(grid)))
    except ValueError:
        ok = False
    if not ok:
        _locate_bad_cell(path, body, first)
    return _assemble(grid, header, body, first, lead, rows)


def _locate_bad_cell(path, body, first):
    for i, ln in enumerate(body):
        for j, cell in enumerate(ln[first:]):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: cannot parse {cell!r} at ({i}, {j})", row=i, col=j) from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value at ({i}, {j})", row=i, col=j)


def _assemble(grid, header, body, first, lead, rows):
    if rows == "time":
        labels = header[first:] if any(header[first:]) else None
        stamps = tuple(ln[0].strip() for ln in body) if lead else None
        values = grid.T
    else:
        labels = [ln[0].strip() for ln in body] if lead else None
        stamps = tuple(header[first:])
        values = grid
    if labels is None or any(not s for s in labels):
        labels = [f"v{k}" for k in range(values.shape[0])]
    return ReturnMatrix(values, tuple(labels), stamps)


def save_returns(rm, path, fmt=None, rows="time"):
    """Write ``rm`` so that ``load_returns`` restores it exactly."""
    delim = _delimiter(path, fmt)
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter=delim, lineterminator="\n")
            if rows == "time":
                stamps = rm.timestamps
                head = (["time"] if stamps is not None else []) + list(rm.labels)
                w.writerow(head)
                for t in range(rm.T):
                    cells = [FLOAT_FORMAT % v for v in rm.values[:, t]]
                    w.writerow(([stamps[t]] if stamps is not None else []) + cells)
            elif rows == "variable":
                stamps = rm.timestamps or tuple(str(t) for t in range(rm.T))
                w.writerow(["label"] + list(stamps))
                for k in range(rm.K):
                    w.writerow([rm.labels[k]] + [FLOAT_FORMAT % v for v in rm.values[k]])
            else:
                raise ValidationError(f"rows must be 'time' or 'variable', got {rows!r}")
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc
    return path


# ------------------------------------------------------------- configuration

@dataclass(frozen=True)
class RunConfig:
    """Settings shared by every pipeline stage.

    Exactly one of ``n_epochs`` / ``epoch_length`` is used; ``n_epochs``
    wins when both are set.
    """

    n_epochs: Optional[int] = 10
    epoch_length: Optional[int] = None
    kind: str = "correlation"
    scale: str = "log"
    bins: int = 101
    rel_tol: float = 1e-12
    quad_tol: float = 1e-10
    seed: int = 20140101
    family: str = "AA"
    rows: str = "time"
    clip: bool = True
    quantile: float = 1e-5
    starts: int = 8
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("correlation", "covariance"):
            raise ValidationError(f"kind must be correlation or covariance, got {self.kind!r}")
        if self.scale not in ("log", "lin"):
            raise ValidationError(f"scale must be log or lin, got {self.scale!r}")
        if self.family not in ("GG", "GA", "AG", "AA"):
            raise ValidationError(f"family must be one of GG GA AG AA, got {self.family!r}")
        if int(self.bins) < 8:
            raise ValidationError("bins must be >= 8")
        if not (self.rel_tol > 0 and self.quad_tol > 0):
            raise ValidationError("tolerances must be positive")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValidationError("seed must be an unsigned 64-bit value")
        if self.n_epochs is None and self.epoch_length is None:
            raise ValidationError("set n_epochs or epoch_length")
        if int(self.starts) < 1:
            raise ValidationError("starts must be >= 1")

    def epoch_spec(self):
        if self.n_epochs is not None:
            return {"n": int(self.n_epochs)}
        return {"length": int(self.epoch_length)}

    def to_dict(self):
        d = asdict(self)
        d.pop("extra")
        d.update(self.extra)
        return d

    def updated(self, **overrides):
        known = {f.name for f in fields(self)} - {"extra"}
        direct = {k: v for k, v in overrides.items() if k in known and v is not None}
        extra = dict(self.extra)
        extra.update({k: v for k, v in overrides.items() if k not in known and v is not None})
        return replace(self, extra=extra, **direct)

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f for f in fields(cls)}
        kwargs, extra = {}, {}
        for key, raw in mapping.items():
            key = key.strip().replace("-", "_")
            if key in known and key != "extra":
                kwargs[key] = _coerce(raw, known[key].default)
            else:
                extra[key] = raw
        return cls(extra=extra, **kwargs)

    @classmethod
    def from_file(cls, path):
        """Flat ``key = value`` text; an optional ``[section]`` line is ignored."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputOutputError(f"cannot read config {path}: {exc}") from exc
        parser = configparser.ConfigParser(interpolation=None)
        if not text.lstrip().startswith("["):
            text = "[run]\n" + text
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ParseError(f"config {path}: {exc}") from exc
        flat = {}
        for section in parser.sections():
            flat.update(parser[section])
        return cls.from_mapping(flat)


def _coerce(raw, default):
    if not isinstance(raw, str):
        return raw
    s = raw.strip()
    if s.lower() in ("none", "null", ""):
        return None
    if isinstance(default, bool):
        if s.lower() in ("1", "true", "yes", "on"):
            return True
        if s.lower() in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"cannot read {raw!r} as a boolean")
    if isinstance(default, int) or default is None and s.lstrip("-").isdigit():
        try:
            return int(s)
        except ValueError:
            pass
    if isinstance(default, float):
        try:
            return float(s)
        except ValueError:
            raise ValidationError(f"cannot read {raw!r} as a number") from None
    return s
