"""Forward/backward stepwise MARS with GCV pruning.

The forward pass adds reflected hinge pairs ``b(x) (x_v - t)_+`` and
``b(x) (t - x_v)_+`` for every admissible parent ``b``, variable ``v`` and
knot ``t``, keeping the pair with the smallest refitted RSS. The backward
pass deletes terms one at a time and keeps the model with the lowest GCV
along the deletion path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basis import MINUS, PLUS, BasisTerm, HingeFactor, design_matrix, default_endspan
from .errors import DataError, DimensionError
from .numerics import as_matrix, as_vector, solve_least_squares

# squared-norm ratio below which a candidate column counts as already spanned
_SPAN_TOL = 1e-10
_TIE_TOL = 1e-12
DEFAULT_MAX_TERMS = 21


@dataclass(frozen=True)
class MarsConfig:
    """Tuning parameters. ``None`` fields are resolved from the data size."""

    max_terms: int | None = None
    max_degree: int = 2
    gcv_penalty: float | None = None
    minspan: int = 1
    endspan: int | None = None
    forward_tol: float = 1e-10

    def __post_init__(self):
        if self.max_terms is not None and self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if self.max_degree < 1:
            raise ValueError("max_degree must be >= 1")
        if self.gcv_penalty is not None and self.gcv_penalty < 0:
            raise ValueError("gcv_penalty must be >= 0")
        if self.minspan < 1:
            raise ValueError("minspan must be >= 1")
        if self.endspan is not None and self.endspan < 0:
            raise ValueError("endspan must be >= 0")

    def resolve_max_terms(self, n: int, p: int) -> int:
        if self.max_terms is not None:
            return self.max_terms
        return max(1, min(DEFAULT_MAX_TERMS, n // 2))

    def resolve_penalty(self) -> float:
        if self.gcv_penalty is not None:
            return float(self.gcv_penalty)
        return 3.0 if self.max_degree > 1 else 2.0

    def resolve_endspan(self, n: int) -> int:
        return default_endspan(n) if self.endspan is None else self.endspan


@dataclass(frozen=True, eq=False)
class MarsModel:
    """A fitted expansion ``theta_0 + sum_j theta_j h_j(x)``."""

    terms: tuple[BasisTerm, ...]
    coefficients: np.ndarray
    training_rss: float
    gcv: float
    n_train: int
    n_features: int
    config: MarsConfig = field(default_factory=MarsConfig)

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.shape != (len(self.terms) + 1,):
            raise DimensionError("coefficients must have length len(terms) + 1")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "terms", tuple(self.terms))

    def _check(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] != self.n_features:
            raise DimensionError(f"model expects {self.n_features} columns, got {X.shape[1]}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        return design_matrix(self.terms, X) @ self.coefficients

    def gradient(self, X) -> np.ndarray:
        """Analytic gradient of the fitted surface at each row; shape ``(n, p)``."""
        X = self._check(X)
        grad = np.zeros(X.shape)
        for theta, term in zip(self.coefficients[1:], self.terms):
            if theta != 0.0:
                grad += theta * term.gradients(X)
        return grad

    @property
    def n_knots(self) -> int:
        return count_knots(self.terms)


def count_knots(terms: Sequence[BasisTerm]) -> int:
    return len({(f.var, f.knot) for t in terms for f in t.factors})


def gcv_score(rss: float, n: int, n_terms: int, n_knots: int, penalty: float) -> float:
    """Generalized cross-validation ``(rss/n) / (1 - C/n)^2`` with ``C = n_terms + penalty * n_knots``.

    ``n_terms`` counts the intercept. Returns ``inf`` when ``C >= n``.
    """
    c = n_terms + penalty * n_knots
    if c >= n:
        return float("inf")
    return (rss / n) / (1.0 - c / n) ** 2


def _validate(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] <= 2:
        raise DataError("need more than 2 observations")
    if X.shape[1] < 1:
        raise DataError("need at least one covariate")
    return X, y


def _hinge_sums(z: np.ndarray, starts: np.ndarray | None, gaps: np.ndarray, square: bool = False):
    """Sums over ``x > u_k`` of ``z (x - u_k)`` (and of ``z (x - u_k)^2``) at each grid value ``u_k``.

    ``z`` is in sorted-x order; ``starts`` marks the first row of each distinct
    value (``None`` when all values are distinct) and ``gaps`` holds the
    spacings of the distinct values. Built from non-negative increments only,
    so no large-term cancellation.
    """
    g = z if starts is None else np.add.reduceat(z, starts, axis=0)
    d = gaps.reshape((-1,) + (1,) * (z.ndim - 1))
    above = np.cumsum(g[:0:-1], axis=0)[::-1]
    lin = np.empty_like(g)
    lin[-1] = 0.0
    np.cumsum((d * above)[::-1], axis=0, out=lin[-2::-1])
    if not square:
        return lin
    quad = np.empty_like(g)
    quad[-1] = 0.0
    np.cumsum((2.0 * d * lin[1:] + d * d * above)[::-1], axis=0, out=quad[-2::-1])
    return lin, quad


class _VariableGrid:
    """Sorted view of one covariate shared by all candidate parents."""

    def __init__(self, x: np.ndarray):
        self.order = np.argsort(x, kind="stable")
        self.xs = x[self.order]
        self.values, starts = np.unique(self.xs, return_index=True)
        self.starts = None if starts.size == x.size else starts
        self.gaps = np.diff(self.values)


def _knot_mask(grid: _VariableGrid, active: np.ndarray, minspan: int, endspan: int) -> np.ndarray:
    vals = grid.xs[active]
    if endspan > 0:
        vals = vals[endspan:-endspan] if vals.size > 2 * endspan else vals[:0]
    knots = np.unique(vals)[::minspan]
    mask = np.zeros(grid.values.size, dtype=bool)
    mask[np.searchsorted(grid.values, knots)] = True
    return mask


def _best_pair_for_variable(grid, parents, Q, r, minspan, endspan, tie_tol):
    """Best (gain, knot, parent position) over all knots and parents for one variable."""
    if grid.values.size < 2:
        return None
    o = grid.order
    xs = grid.xs
    Bs = parents[o]
    Qs = Q[o]
    rs = r[o]

    # pair span = span(b * x_v, b * (x_v - t)_+) once b is in the model
    U = Bs * xs[:, None]
    Uperp = U - Qs @ (Qs.T @ U)
    wu = np.einsum("ij,ij->j", Uperp, Uperp)
    un = np.einsum("ij,ij->j", U, U)
    valid_u = wu > _SPAN_TOL * un
    ru = rs @ U
    alpha = np.where(valid_u, ru / np.where(valid_u, wu, 1.0), 0.0)
    gain_u = alpha * ru
    Rp = rs[:, None] - Uperp * alpha

    starts, gaps = grid.starts, grid.gaps
    _, cc = _hinge_sums(Bs * Bs, starts, gaps, square=True)
    k = Qs.shape[1]
    z = np.empty((xs.size, k + 2, Bs.shape[1]))
    np.multiply(Qs[:, :, None], Bs[:, None, :], out=z[:, :k])
    np.multiply(Rp, Bs, out=z[:, k])
    np.multiply(Uperp, Bs, out=z[:, k + 1])
    sums = _hinge_sums(z, starts, gaps)
    qq = np.einsum("gkp,gkp->gp", sums[:, :k], sums[:, :k])
    rc = sums[:, k]
    uc = sums[:, k + 1]
    ucc = np.where(valid_u, uc * uc / np.where(valid_u, wu, 1.0), 0.0)
    cperp = cc - qq - ucc
    valid_c = cperp > _SPAN_TOL * cc
    gain = gain_u + np.where(valid_c, rc * rc / np.where(valid_c, cperp, 1.0), 0.0)

    mask = np.zeros(gain.shape, dtype=bool)
    for j in range(Bs.shape[1]):
        mask[:, j] = _knot_mask(grid, Bs[:, j] != 0.0, minspan, endspan)
    if not mask.any():
        return None
    gain = np.where(mask, gain, -np.inf)
    top = gain.max()
    # row-major scan: smallest knot first, then lowest parent
    k, j = np.argwhere(gain >= top - tie_tol)[0]
    return float(gain[k, j]), float(grid.values[k]), int(j)


def _extend_basis(Q: np.ndarray, col: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(col)
    if nrm == 0.0:
        return Q
    v = col - Q @ (Q.T @ col)
    v -= Q @ (Q.T @ v)
    nv = np.linalg.norm(v)
    if nv * nv <= _SPAN_TOL * nrm * nrm:
        return Q
    return np.column_stack([Q, v / nv])


def forward_pass(X, y, cfg: MarsConfig = MarsConfig(), return_rss: bool = False):
    """Greedy forward selection of reflected hinge pairs.

    Stops once the model holds ``max_terms`` columns (intercept included), when
    no admissible candidate remains, or when the best RSS reduction falls
    below ``forward_tol`` times the current RSS. With
    ``return_rss=True`` also returns the RSS after every accepted step
    (starting with the intercept-only fit).
    """
    X, y = _validate(X, y)
    n, p = X.shape
    max_terms = cfg.resolve_max_terms(n, p)
    endspan = cfg.resolve_endspan(n)
    r = y - y.mean()
    sst = float(r @ r)
    terms: list[BasisTerm] = []
    history = [sst]
    if np.ptp(y) == 0.0:
        return (terms, history) if return_rss else terms

    all_terms = [BasisTerm()]
    columns = [np.ones(n)]
    Q = np.full((n, 1), 1.0 / np.sqrt(n))
    rss = sst
    grids = [_VariableGrid(X[:, v]) for v in range(p)]
    tie_tol = _TIE_TOL * sst

    while len(terms) + 1 < max_terms:
        best = None
        for v in range(p):
            idx = [j for j, t in enumerate(all_terms)
                   if t.degree < cfg.max_degree and v not in t.variables]
            if not idx:
                continue
            parents = np.column_stack([columns[j] for j in idx])
            found = _best_pair_for_variable(grids[v], parents, Q, r, cfg.minspan, endspan, tie_tol)
            if found is None:
                continue
            gain, knot, pos = found
            if best is None or gain > best[0] + tie_tol:
                best = (gain, v, knot, idx[pos])
        if best is None or best[0] <= cfg.forward_tol * rss:
            break
        _, v, knot, parent = best
        for sign in (PLUS, MINUS):
            term = all_terms[parent].times(HingeFactor(v, knot, sign))
            col = columns[parent] * term.factors[term.variables.index(v)].values(X)
            terms.append(term)
            all_terms.append(term)
            columns.append(col)
            Q = _extend_basis(Q, col)
        r = y - Q @ (Q.T @ y)
        rss = float(r @ r)
        history.append(rss)
    return (terms, history) if return_rss else terms


def _count_params(terms: Sequence[BasisTerm]) -> tuple[int, int]:
    return len(terms) + 1, count_knots(terms)


def backward_pass(terms: Sequence[BasisTerm], X, y, cfg: MarsConfig = MarsConfig(),
                  return_path: bool = False):
    """Prune ``terms`` one at a time and return the minimum-GCV model on the path.

    Each step removes the term whose deletion gives the smallest refitted RSS.
    With ``return_path=True`` also returns the list of ``(term indices, rss, gcv)``
    visited, starting from the full model.
    """
    X, y = _validate(X, y)
    n, p = X.shape
    terms = list(terms)
    penalty = cfg.resolve_penalty()
    H = design_matrix(terms, X)
    scale = float(np.sum((y - y.mean()) ** 2))

    def evaluate(keep):
        cols = [0] + [i + 1 for i in keep]
        coef = solve_least_squares(H[:, cols], y)
        res = y - H[:, cols] @ coef
        rss = float(res @ res)
        kept = [terms[i] for i in keep]
        return rss, gcv_score(rss, n, *_count_params(kept), penalty)

    current = list(range(len(terms)))
    rss, gcv = evaluate(current)
    path = [(tuple(current), rss, gcv)]
    while current:
        best = None
        for j in reversed(current):
            trial = [i for i in current if i != j]
            rss_j, gcv_j = evaluate(trial)
            if best is None or rss_j < best[1] - _TIE_TOL * scale:
                best = (trial, rss_j, gcv_j)
        current = best[0]
        path.append((tuple(current), best[1], best[2]))

    # ties favour the smaller model
    chosen = min(range(len(path)), key=lambda k: (path[k][2], -k))
    keep = list(path[chosen][0])
    kept = [terms[i] for i in keep]
    Hk = H[:, [0] + [i + 1 for i in keep]]
    coef = solve_least_squares(Hk, y)
    res = y - Hk @ coef
    rss = float(res @ res)
    model = MarsModel(
        terms=tuple(kept),
        coefficients=coef,
        training_rss=rss,
        gcv=gcv_score(rss, n, *_count_params(kept), penalty),
        n_train=n,
        n_features=p,
        config=cfg,
    )
    return (model, path) if return_path else model


def fit(X, y, cfg: MarsConfig = MarsConfig()) -> MarsModel:
    """Forward pass, backward pruning, and a final least-squares refit."""
    terms = forward_pass(X, y, cfg)
    return backward_pass(terms, X, y, cfg)


def predict(model: MarsModel, X) -> np.ndarray:
    return model.predict(X)
