"""MARS refitted on OPG-projected covariates.

``reduced`` mode fits MARS to ``X @ B`` only. ``combined`` mode appends the
projections after the original columns, so the forward pass may choose
hinges on either; its fit splits into an intercept, a part that uses only
projected columns and a part touching original columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import mars
from .data import Standardization, fit_standardization
from .errors import DimensionError
from .numerics import EigenResult, as_matrix
from .sdr import SdrEstimate, directions_from_eigen, opg_eigen, select_dimension

REDUCED = "reduced"
COMBINED = "combined"
DEFAULT_D_MAX = 5


@dataclass(frozen=True, eq=False)
class DrMarsModel:
    sdr: SdrEstimate
    inner: mars.MarsModel
    mode: str
    input_dim: int
    standardization: Standardization | None = None

    def __post_init__(self):
        if self.mode not in (REDUCED, COMBINED):
            raise ValueError(f"mode must be {REDUCED!r} or {COMBINED!r}")
        expected = self.sdr.chosen_d + (self.input_dim if self.mode == COMBINED else 0)
        if self.inner.n_features != expected:
            raise DimensionError(f"inner model has {self.inner.n_features} inputs, expected {expected}")
        if self.sdr.p != self.input_dim:
            raise DimensionError("direction matrix does not match input_dim")

    def features(self, X) -> np.ndarray:
        """Covariates seen by the inner MARS model."""
        X = as_matrix(X, "X")
        if X.shape[1] != self.input_dim:
            raise DimensionError(f"expected {self.input_dim} columns, got {X.shape[1]}")
        if self.standardization is not None:
            X = self.standardization.apply(X)
        Z = X @ self.sdr.directions
        return np.hstack([X, Z]) if self.mode == COMBINED else Z

    def predict(self, X) -> np.ndarray:
        return self.inner.predict(self.features(X))


def project(sdr: SdrEstimate, X) -> np.ndarray:
    return sdr.project(X)


def predict_drmars(model: DrMarsModel, X) -> np.ndarray:
    return model.predict(X)


def _prepare(X, y, standardize):
    X = as_matrix(X, "X")
    y = np.asarray(y, dtype=float)
    params = fit_standardization(X) if standardize else None
    return (X if params is None else params.apply(X)), y, params


def _directions(X, y, d, cfg, seed, opg, d_max, folds, threads=1) -> SdrEstimate:
    eig = opg if opg is not None else opg_eigen(X, y, cfg)[1]
    if d == "auto":
        chosen, table = select_dimension(X, y, min(d_max, X.shape[1]), folds, cfg, seed, eig=eig,
                                         threads=threads)
        est = directions_from_eigen(eig, chosen)
        return SdrEstimate(est.directions, est.eigenvalues, chosen, table)
    d = int(d)
    if d < 1:
        raise ValueError(f"reduced dimension must be at least 1, got {d}")
    return directions_from_eigen(eig, d)


def fit_drmars(X, y, d="auto", cfg: mars.MarsConfig = mars.MarsConfig(), seed: int = 0,
               standardize: bool = False, opg: EigenResult | None = None,
               d_max: int = DEFAULT_D_MAX, folds: int = 10, threads: int = 1) -> DrMarsModel:
    """Estimate OPG directions, project, and refit MARS on the projections.

    ``d="auto"`` picks the dimension by ``folds``-fold CV over ``1..d_max``.
    ``opg`` reuses an eigen-decomposition computed on the same (standardized)
    data.
    """
    Xs, y, params = _prepare(X, y, standardize)
    sdr = _directions(Xs, y, d, cfg, seed, opg, d_max, folds, threads)
    inner = mars.fit(Xs @ sdr.directions, y, cfg)
    return DrMarsModel(sdr, inner, REDUCED, Xs.shape[1], params)


def fit_combined(X, y, d="auto", cfg: mars.MarsConfig = mars.MarsConfig(), seed: int = 0,
                 standardize: bool = False, opg: EigenResult | None = None,
                 d_max: int = DEFAULT_D_MAX, folds: int = 10, threads: int = 1) -> DrMarsModel:
    """MARS over the original columns followed by the ``d`` projected columns."""
    if d != "auto" and int(d) < 1:
        raise ValueError(f"reduced dimension must be at least 1, got {d}")
    Xs, y, params = _prepare(X, y, standardize)
    sdr = _directions(Xs, y, d, cfg, seed, opg, d_max, folds, threads)
    inner = mars.fit(np.hstack([Xs, Xs @ sdr.directions]), y, cfg)
    return DrMarsModel(sdr, inner, COMBINED, Xs.shape[1], params)


class CombinedParts(NamedTuple):
    """Intercept plus zero-intercept sub-models over the combined covariates."""

    intercept: float
    projected: mars.MarsModel
    original: mars.MarsModel


def _submodel(model: mars.MarsModel, idx: list[int]) -> mars.MarsModel:
    coef = np.concatenate([[0.0], model.coefficients[1:][idx]]) if idx else np.zeros(1)
    return mars.MarsModel(
        terms=tuple(model.terms[i] for i in idx),
        coefficients=coef,
        training_rss=model.training_rss,
        gcv=model.gcv,
        n_train=model.n_train,
        n_features=model.n_features,
        config=model.config,
    )


def decompose_combined(model: DrMarsModel) -> CombinedParts:
    """Split a combined fit into intercept, projected-only terms and terms touching original columns."""
    if model.mode != COMBINED:
        raise ValueError("decomposition needs a combined-mode model")
    p = model.input_dim
    projected, original = [], []
    for i, term in enumerate(model.inner.terms):
        (original if any(v < p for v in term.variables) else projected).append(i)
    return CombinedParts(float(model.inner.coefficients[0]),
                         _submodel(model.inner, projected),
                         _submodel(model.inner, original))


def component_values(model: DrMarsModel, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Intercept, projected-part and original-part contributions at each row of ``X``."""
    parts = decompose_combined(model)
    F = model.features(X)
    const = np.full(F.shape[0], parts.intercept)
    return const, parts.projected.predict(F), parts.original.predict(F)


def classify(model, X, threshold: float = 0.5) -> np.ndarray:
    """0/1 labels from the rule ``prediction > threshold``."""
    return (model.predict(X) > threshold).astype(int)
