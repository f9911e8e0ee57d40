"""Dimension-reduction directions from the outer product of MARS gradients.

The gradient of a fitted MARS surface is available in closed form, so the
average outer product of gradients over the training points can be formed
directly; its leading eigenvectors estimate the central mean subspace.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import mars
from .errors import DataError, DimensionError
from .numerics import EigenResult, as_matrix, rng_stream, sym_eigen


@dataclass(frozen=True, eq=False)
class SdrEstimate:
    """Orthonormal direction matrix (``p x d``) plus the full OPG spectrum."""

    directions: np.ndarray
    eigenvalues: np.ndarray
    chosen_d: int
    cv_table: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self):
        B = np.asarray(self.directions, dtype=float)
        if B.ndim != 2 or B.shape[1] != self.chosen_d:
            raise DimensionError("directions must be p x chosen_d")
        if not 1 <= self.chosen_d <= B.shape[0]:
            raise ValueError("chosen_d must lie in [1, p]")
        object.__setattr__(self, "directions", B)
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))

    @property
    def p(self) -> int:
        return self.directions.shape[0]

    def project(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] != self.p:
            raise DimensionError(f"expected {self.p} columns, got {X.shape[1]}")
        return X @ self.directions


def estimate_gradients(model: mars.MarsModel, X) -> np.ndarray:
    """Gradient of the fitted expansion at each row of ``X``."""
    return model.gradient(X)


def opg_matrix(grads) -> np.ndarray:
    """``(1/n) sum_i g_i g_i^T``, symmetrized exactly."""
    G = as_matrix(grads, "grads")
    if G.shape[0] < 1:
        raise DataError("need at least one gradient row")
    S = G.T @ G / G.shape[0]
    return 0.5 * (S + S.T)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        k = int(np.argmax(np.abs(V[:, j])))
        if V[k, j] < 0:
            V[:, j] = -V[:, j]
    return V


def directions_from_eigen(eig: EigenResult, d: int) -> SdrEstimate:
    p = eig.vectors.shape[0]
    if not 1 <= d <= p:
        raise ValueError(f"d must lie in [1, {p}], got {d}")
    return SdrEstimate(_fix_signs(eig.vectors[:, :d]), eig.values.copy(), d)


def sdr_directions(sigma, d: int) -> SdrEstimate:
    """Top-``d`` eigenvectors of ``sigma``; each column's largest-magnitude entry is positive."""
    sigma = as_matrix(sigma, "sigma")
    if not 1 <= d <= sigma.shape[0]:
        raise ValueError(f"d must lie in [1, {sigma.shape[0]}], got {d}")
    return directions_from_eigen(sym_eigen(sigma), d)


def opg_eigen(X, y, cfg: mars.MarsConfig = mars.MarsConfig()) -> tuple[mars.MarsModel, EigenResult]:
    """Fit MARS on ``(X, y)`` and eigen-decompose the OPG matrix of its gradients."""
    model = mars.fit(X, y, cfg)
    return model, sym_eigen(opg_matrix(model.gradient(X)))


def fit_sdr(X, y, d: int, cfg: mars.MarsConfig = mars.MarsConfig()) -> SdrEstimate:
    _, eig = opg_eigen(X, y, cfg)
    return directions_from_eigen(eig, d)


def fold_assignment(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded random permutation cut into ``folds`` blocks; the last absorbs the remainder."""
    if folds < 2 or n // folds < 2:
        raise DataError(f"fold size must be at least 2 (n={n}, folds={folds})")
    perm = rng_stream(seed, 0).permutation(n)
    size = n // folds
    return [perm[k * size:(k + 1) * size] if k < folds - 1 else perm[k * size:]
            for k in range(folds)]


def cv_score(Z, y, fold_idx: list[np.ndarray], cfg: mars.MarsConfig) -> float:
    """Mean out-of-fold R^2 of MARS fitted on the projected covariates ``Z``."""
    n = Z.shape[0]
    scores = []
    for test in fold_idx:
        train = np.setdiff1d(np.arange(n), test)
        model = mars.fit(Z[train], y[train], cfg)
        resid = y[test] - model.predict(Z[test])
        centred = y[test] - y[train].mean()
        scores.append(1.0 - (resid @ resid) / (centred @ centred))
    return float(np.mean(scores))


def _fixed_cell(args) -> float:
    X, y, B, fold_idx, cfg = args
    return cv_score(X @ B, y, fold_idx, cfg)


def _per_fold_cell(args) -> float:
    X, y, d, fold_idx, fold_eigs, cfg = args
    n = X.shape[0]
    scores = []
    for test, fe in zip(fold_idx, fold_eigs):
        B = directions_from_eigen(fe, d).directions
        train = np.setdiff1d(np.arange(n), test)
        Z = X @ B
        model = mars.fit(Z[train], y[train], cfg)
        resid = y[test] - model.predict(Z[test])
        centred = y[test] - y[train].mean()
        scores.append(1.0 - (resid @ resid) / (centred @ centred))
    return float(np.mean(scores))


def select_dimension(X, y, d_max: int = 5, folds: int = 10,
                     cfg: mars.MarsConfig = mars.MarsConfig(), seed: int = 0,
                     eig: EigenResult | None = None,
                     per_fold_directions: bool = False, threads: int = 1):
    """Choose the reduced dimension by K-fold cross-validated R^2.

    Directions for each candidate ``d`` come from the whole sample (pass
    ``eig`` to reuse a decomposition already computed). With
    ``per_fold_directions=True`` the OPG directions are instead re-estimated
    without the held-out fold. ``threads > 1`` scores the candidate
    dimensions in worker processes. Returns ``(chosen_d, cv_table)``; ties
    go to the smaller ``d``.
    """
    X = as_matrix(X, "X")
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if not 1 <= d_max <= p:
        raise ValueError(f"d_max must lie in [1, {p}]")
    fold_idx = fold_assignment(n, folds, seed)
    dims = range(1, d_max + 1)
    if per_fold_directions:
        fold_eigs = []
        for test in fold_idx:
            train = np.setdiff1d(np.arange(n), test)
            fold_eigs.append(opg_eigen(X[train], y[train], cfg)[1])
        cells = [(X, y, d, fold_idx, fold_eigs, cfg) for d in dims]
        work = _per_fold_cell
    else:
        if eig is None:
            _, eig = opg_eigen(X, y, cfg)
        cells = [(X, y, directions_from_eigen(eig, d).directions, fold_idx, cfg) for d in dims]
        work = _fixed_cell

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(work, cells))
    else:
        scores = [work(c) for c in cells]
    table = tuple((d, float(s)) for d, s in zip(dims, scores))
    best = max(table, key=lambda row: (row[1], -row[0]))
    return best[0], table
