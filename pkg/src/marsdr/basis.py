"""Hinge functions and their tensor products.

A :class:`HingeFactor` is one member of a reflected pair, ``(x_k - t)_+``
(sign ``+1``) or ``(t - x_k)_+`` (sign ``-1``). A :class:`BasisTerm` is a
product of hinges over distinct covariates; the empty product is the
intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError
from .numerics import as_matrix

PLUS = 1
MINUS = -1


@dataclass(frozen=True, order=True)
class HingeFactor:
    var: int
    knot: float
    sign: int

    def __post_init__(self):
        if self.sign not in (PLUS, MINUS):
            raise ValueError(f"sign must be +1 or -1, got {self.sign!r}")
        if not math.isfinite(self.knot):
            raise ValueError("knot must be finite")
        if self.var < 0:
            raise ValueError("var must be non-negative")

    def values(self, X: np.ndarray) -> np.ndarray:
        return np.maximum(self.sign * (X[:, self.var] - self.knot), 0.0)

    def slopes(self, X: np.ndarray) -> np.ndarray:
        # open indicator: the partial is 0 exactly at the knot
        return self.sign * (self.sign * (X[:, self.var] - self.knot) > 0.0)


@dataclass(frozen=True)
class BasisTerm:
    factors: tuple[HingeFactor, ...] = ()

    def __post_init__(self):
        factors = tuple(sorted(self.factors, key=lambda f: f.var))
        variables = [f.var for f in factors]
        if len(set(variables)) != len(variables):
            raise ValueError(f"factors must use distinct variables, got {variables}")
        object.__setattr__(self, "factors", factors)

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(f.var for f in self.factors)

    def times(self, factor: HingeFactor) -> "BasisTerm":
        return BasisTerm(self.factors + (factor,))

    def values(self, X: np.ndarray) -> np.ndarray:
        out = np.ones(X.shape[0])
        for f in self.factors:
            out = out * f.values(X)
        return out

    def gradients(self, X: np.ndarray) -> np.ndarray:
        """Analytic gradient at every row of ``X``; shape ``(n, p)``."""
        n, p = X.shape
        grad = np.zeros((n, p))
        if not self.factors:
            return grad
        vals = [f.values(X) for f in self.factors]
        for i, f in enumerate(self.factors):
            partial = f.slopes(X).astype(float)
            for j, v in enumerate(vals):
                if j != i:
                    partial = partial * v
            grad[:, f.var] = partial
        return grad

    def __str__(self):
        if not self.factors:
            return "1"
        parts = []
        for f in self.factors:
            if f.sign == PLUS:
                parts.append(f"h(x{f.var}-{f.knot:.6g})")
            else:
                parts.append(f"h({f.knot:.6g}-x{f.var})")
        return "*".join(parts)


def _check_index(term: BasisTerm, p: int):
    for f in term.factors:
        if f.var >= p:
            raise DimensionError(f"factor variable {f.var} out of range for p={p}")


def _row(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError("x must be a 1-D vector")
    return x.reshape(1, -1)


def hinge_eval(h: HingeFactor, x) -> float:
    X = _row(x)
    if h.var >= X.shape[1]:
        raise DimensionError(f"variable {h.var} out of range for p={X.shape[1]}")
    return float(h.values(X)[0])


def term_eval(term: BasisTerm, x) -> float:
    X = _row(x)
    _check_index(term, X.shape[1])
    return float(term.values(X)[0])


def term_grad(term: BasisTerm, x) -> np.ndarray:
    X = _row(x)
    _check_index(term, X.shape[1])
    return term.gradients(X)[0]


def design_matrix(terms: Sequence[BasisTerm], X) -> np.ndarray:
    """Columns ``[1, term_1(X), ..., term_m(X)]``."""
    X = as_matrix(X, "X")
    H = np.empty((X.shape[0], len(terms) + 1))
    H[:, 0] = 1.0
    for j, term in enumerate(terms):
        _check_index(term, X.shape[1])
        H[:, j + 1] = term.values(X)
    return H


def default_endspan(n: int) -> int:
    """Observations kept beyond the outermost knot: 5% of the sample, at least one."""
    return max(1, int(0.05 * n))


def candidate_knots(
    X,
    var: int,
    parent_active: Iterable[bool] | None = None,
    minspan: int = 1,
    endspan: int = 0,
) -> np.ndarray:
    """Observed values of column ``var`` usable as knots under a parent term.

    Only rows where the parent is nonzero count. The ``endspan`` smallest and
    largest order statistics are dropped, duplicates removed, and every
    ``minspan``-th remaining value kept.
    """
    X = np.asarray(X, dtype=float)
    if not 0 <= var < X.shape[1]:
        raise DimensionError(f"variable {var} out of range for p={X.shape[1]}")
    col = X[:, var]
    if parent_active is not None:
        col = col[np.asarray(parent_active, dtype=bool)]
    col = np.sort(col)
    if endspan > 0:
        col = col[endspan:-endspan] if col.size > 2 * endspan else col[:0]
    return np.unique(col)[:: max(1, minspan)]
