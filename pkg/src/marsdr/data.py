"""CSV datasets, train/test splitting and per-column standardization."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError
from .numerics import as_matrix, as_vector, rng_stream

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "none", "?"}


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    column_names: tuple[str, ...] | None = None
    response_name: str | None = None
    n_rejected: int = 0

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        y = as_vector(self.y, "y")
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if self.column_names is not None and len(self.column_names) != X.shape[1]:
            raise DimensionError("column_names must match the number of columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], self.column_names, self.response_name)


def _resolve_column(header: list[str] | None, ncols: int, column) -> int:
    if isinstance(column, int) or (isinstance(column, str) and column.lstrip("-").isdigit()
                                   and (header is None or column not in header)):
        idx = int(column)
        if idx < 0:
            idx += ncols
        if not 0 <= idx < ncols:
            raise DataError(f"response column {column} out of range for {ncols} columns")
        return idx
    if header is None or column not in header:
        raise DataError(f"response column {column!r} not found")
    return header.index(column)


def read_table(path, has_header: bool = True):
    """Parse a numeric CSV into ``(header, values, n_rejected)``.

    Rows containing a missing cell are dropped and counted; any other
    non-numeric cell raises :class:`DataError` naming its row and column.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]] if has_header else None
    body = rows[1:] if has_header else rows
    ncols = len(header) if header else len(body[0]) if body else 0
    values = []
    rejected = 0
    first_line = 2 if has_header else 1
    for i, row in enumerate(body):
        line = first_line + i
        if len(row) != ncols:
            raise DataError(f"{path}: row {line} has {len(row)} cells, expected {ncols}")
        cells = [c.strip() for c in row]
        if any(c.lower() in MISSING for c in cells):
            rejected += 1
            continue
        parsed = []
        for j, c in enumerate(cells):
            try:
                v = float(c)
            except ValueError:
                name = header[j] if header else str(j)
                raise DataError(f"{path}: row {line}, column {name!r}: cannot parse {c!r}") from None
            if not np.isfinite(v):
                name = header[j] if header else str(j)
                raise DataError(f"{path}: row {line}, column {name!r}: non-finite value")
            parsed.append(v)
        values.append(parsed)
    if rejected:
        log.warning("%s: rejected %d row(s) with missing cells", path, rejected)
    return header, np.array(values, dtype=float).reshape(len(values), ncols), rejected


def load_csv(path, response_column=-1, has_header: bool = True) -> Dataset:
    """Load a numeric CSV; ``response_column`` is a header name or 0-based index."""
    header, values, rejected = read_table(path, has_header)
    idx = _resolve_column(header, values.shape[1], response_column)
    keep = [j for j in range(values.shape[1]) if j != idx]
    names = tuple(header[j] for j in keep) if header else None
    return Dataset(values[:, keep], values[:, idx], names,
                   header[idx] if header else None, rejected)


def load_features(path, n_features: int | None = None, has_header: bool = True,
                  drop_column=None) -> np.ndarray:
    """Covariate matrix from a CSV, optionally dropping a response column."""
    header, values, _ = read_table(path, has_header)
    if drop_column is not None:
        idx = _resolve_column(header, values.shape[1], drop_column)
        values = np.delete(values, idx, axis=1)
    if n_features is not None and values.shape[1] != n_features:
        raise DataError(f"{path}: expected {n_features} covariate columns, got {values.shape[1]}")
    return values


def write_csv(path, columns: dict[str, np.ndarray]):
    """Write equal-length columns with 17 significant digits."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in data:
            w.writerow([f"{v:.17g}" for v in row])


def write_dataset(path, ds: Dataset):
    names = ds.column_names or tuple(f"x{j}" for j in range(ds.p))
    cols = {name: ds.X[:, j] for j, name in enumerate(names)}
    cols[ds.response_name or "y"] = ds.y
    write_csv(path, cols)


def train_test_split(ds: Dataset, n_train: int, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 1 <= n_train < ds.n:
        raise ValueError(f"n_train must lie in [1, {ds.n - 1}], got {n_train}")
    perm = rng_stream(seed, 1).permutation(ds.n)
    return ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))


@dataclass(frozen=True, eq=False)
class Standardization:
    """Per-column ``(mean, scale)`` pairs estimated on training data."""

    means: np.ndarray
    scales: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] != self.means.size:
            raise DimensionError(f"expected {self.means.size} columns, got {X.shape[1]}")
        return (X - self.means) / self.scales


def fit_standardization(X) -> Standardization:
    """Column means and sample standard deviations (divisor ``n - 1``).

    Constant columns keep scale 1 and trigger a warning.
    """
    X = as_matrix(X, "X")
    means = X.mean(axis=0)
    scales = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(X.shape[1])
    flat = np.ptp(X, axis=0) == 0.0
    if np.any(flat):
        log.warning("constant column(s) %s left unscaled", np.flatnonzero(flat).tolist())
        scales = np.where(flat, 1.0, scales)
    return Standardization(means, scales)


def standardize_fit(ds: Dataset) -> tuple[Standardization, Dataset]:
    """Estimate standardization on ``ds`` and return it with the transformed data."""
    params = fit_standardization(ds.X)
    return params, standardize_apply(params, ds)


def standardize_apply(params: Standardization, ds: Dataset) -> Dataset:
    return Dataset(params.apply(ds.X), ds.y, ds.column_names, ds.response_name, ds.n_rejected)
