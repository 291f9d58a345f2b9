"""Immutable sample matrices, CSV ingestion and complete-case views."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InsufficientSamples, ParseError


def _frozen(arr, dtype):
    arr = np.array(arr, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """An N x d matrix of finite samples with named columns.

    ``mask`` marks present cells; it is None when nothing is missing. Missing
    cells carry a 0.0 placeholder and must never reach an estimator, use
    :func:`select_complete` first.
    """

    values: np.ndarray
    column_names: tuple
    mask: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataError(f"expected a 2-D sample matrix, got {values.ndim}-D")
        n, d = values.shape
        if n < 1 or d < 1:
            raise DataError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != d:
            raise DataError(f"{len(names)} column names for {d} columns")
        if len(set(names)) != d:
            raise DataError(f"duplicate column names in {names}")
        mask = self.mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != values.shape:
                raise DataError("mask shape does not match values")
            if mask.all():
                mask = None
        present = values if mask is None else values[mask]
        if not np.all(np.isfinite(present)):
            raise DataError("non-finite sample values")
        if mask is not None:
            values = np.where(mask, values, 0.0)
        object.__setattr__(self, "values", _frozen(values, float))
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "mask", None if mask is None else _frozen(mask, bool))

    @classmethod
    def from_array(cls, values, column_names=None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if column_names is None:
            column_names = [f"x{j + 1}" for j in range(values.shape[1])]
        return cls(values, tuple(column_names))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def has_missing(self):
        return self.mask is not None

    def present(self):
        """Boolean presence mask, materialized even when nothing is missing."""
        if self.mask is None:
            return np.ones(self.values.shape, dtype=bool)
        return self.mask

    def column_index(self, col):
        if isinstance(col, (int, np.integer)):
            if not 0 <= col < self.d:
                raise DataError(f"column index {col} out of range for d={self.d}")
            return int(col)
        try:
            return self.column_names.index(str(col))
        except ValueError:
            raise DataError(f"unknown column {col!r}") from None

    def project(self, columns):
        """Column subset as a new Dataset (rows unchanged)."""
        idx = [self.column_index(c) for c in columns]
        mask = None if self.mask is None else self.mask[:, idx]
        return Dataset(self.values[:, idx], [self.column_names[j] for j in idx], mask)

    def take_rows(self, rows):
        rows = np.asarray(rows)
        mask = None if self.mask is None else self.mask[rows]
        return Dataset(self.values[rows], self.column_names, mask)

    def to_csv(self, path, missing_token=""):
        lines = [",".join(self.column_names)]
        present = self.present()
        for r in range(self.n):
            cells = [
                repr(float(v)) if ok else missing_token
                for v, ok in zip(self.values[r], present[r])
            ]
            lines.append(",".join(cells))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def as_values(data):
    """Sample matrix of a Dataset or array-like, refusing missing cells."""
    if isinstance(data, Dataset):
        if data.has_missing:
            raise DataError("dataset has missing cells; select complete rows first")
        return data.values
    values = np.asarray(data, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if not np.all(np.isfinite(values)):
        raise DataError("non-finite sample values")
    return values


def ingest_csv(path, missing_token=""):
    """Read a headered, comma-separated numeric file into a Dataset.

    Cells equal to ``missing_token`` (after stripping whitespace) are marked
    absent in the returned mask. Quoting is not supported.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError("empty file, header row required")
    header = [h.strip() for h in lines[0].split(",")]
    if any(not h for h in header):
        raise ParseError("empty column name in header")
    seen = set()
    for h in header:
        if h in seen:
            raise ParseError(f"duplicate header {h!r}", column=h)
        seen.add(h)
    d = len(header)
    rows = lines[1:]
    if not rows:
        raise ParseError("no data rows")
    values = np.zeros((len(rows), d))
    mask = np.ones((len(rows), d), dtype=bool)
    token = missing_token.strip()
    for r, line in enumerate(rows):
        cells = line.split(",")
        if len(cells) != d:
            raise ParseError(
                f"expected {d} fields, found {len(cells)} (quoted or embedded commas "
                "are not supported)",
                row=r + 1,
            )
        for j, cell in enumerate(cells):
            cell = cell.strip()
            if cell == token:
                mask[r, j] = False
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"malformed number {cell!r}", row=r + 1, column=header[j]) from None
            if not math.isfinite(v):
                kind = "overflow" if math.isinf(v) else "non-finite value"
                raise ParseError(f"{kind} in {cell!r}", row=r + 1, column=header[j])
            values[r, j] = v
    return Dataset(values, header, mask)


@dataclass(frozen=True)
class ColumnPairView:
    """Rows of ``source`` where every selected column is present."""

    source: Dataset = field(repr=False)
    columns: tuple
    row_mask: np.ndarray = field(repr=False)
    effective_n: int

    def dataset(self):
        return self.source.project(self.columns).take_rows(np.flatnonzero(self.row_mask))


def select_complete(data, columns, min_rows=1):
    idx = tuple(data.column_index(c) for c in columns)
    rows = data.present()[:, list(idx)].all(axis=1)
    effective = int(rows.sum())
    if effective < min_rows:
        raise InsufficientSamples(effective, min_rows)
    rows.setflags(write=False)
    return ColumnPairView(data, idx, rows, effective)


def deduplicate_jitter(data, amplitude_rel=1e-10, seed=0):
    """Add seeded uniform noise of half-width ``amplitude_rel`` x column range.

    A column whose present values are all equal uses scale 1. Missing cells
    stay missing and keep their placeholder.
    """
    if amplitude_rel < 0:
        raise ValueError("amplitude_rel must be >= 0")
    if amplitude_rel == 0:
        return data
    present = data.present()
    scale = np.ones(data.d)
    for j in range(data.d):
        col = data.values[present[:, j], j]
        if col.size:
            span = float(col.max() - col.min())
            if span > 0:
                scale[j] = span
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=data.values.shape) * (amplitude_rel * scale)
    out = np.where(present, data.values + noise, data.values)
    return Dataset(out, data.column_names, data.mask)
