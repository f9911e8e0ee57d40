"""JSON model files.

One document holds the mode, optional standardization, the OPG directions
(for reduced/combined fits), the inner MARS terms and coefficients, and
training metadata. Floats go through ``repr`` so a save/load round trip is
exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import mars
from .basis import BasisTerm, HingeFactor
from .data import Standardization
from .drmars import COMBINED, REDUCED, DrMarsModel
from .errors import ModelFormatError
from .numerics import as_matrix
from .sdr import SdrEstimate

FORMAT_VERSION = 1
MARS = "mars"


@dataclass(frozen=True, eq=False)
class ModelFile:
    """A loaded (or about to be saved) model with its file-level metadata.

    ``standardization`` is only used in ``mars`` mode; reduced and combined
    models carry their own.
    """

    model: mars.MarsModel | DrMarsModel
    standardization: Standardization | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.model.mode if isinstance(self.model, DrMarsModel) else MARS

    @property
    def input_dim(self) -> int:
        if isinstance(self.model, DrMarsModel):
            return self.model.input_dim
        return self.model.n_features

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if self.standardization is not None and self.mode == MARS:
            X = self.standardization.apply(X)
        return self.model.predict(X)


def _mars_to_dict(m: mars.MarsModel) -> dict:
    return {
        "terms": [[{"var": f.var, "knot": f.knot, "sign": f.sign} for f in t.factors]
                  for t in m.terms],
        "coefficients": m.coefficients.tolist(),
        "training_rss": m.training_rss,
        "gcv": m.gcv,
        "n_train": m.n_train,
        "n_features": m.n_features,
        "config": asdict(m.config),
    }


def _mars_from_dict(d: dict) -> mars.MarsModel:
    terms = tuple(
        BasisTerm(tuple(HingeFactor(int(f["var"]), float(f["knot"]), int(f["sign"])) for f in t))
        for t in d["terms"]
    )
    return mars.MarsModel(
        terms=terms,
        coefficients=np.array(d["coefficients"], dtype=float),
        training_rss=float(d["training_rss"]),
        gcv=float(d["gcv"]),
        n_train=int(d["n_train"]),
        n_features=int(d["n_features"]),
        config=mars.MarsConfig(**d["config"]),
    )


def _std_to_dict(s: Standardization | None):
    if s is None:
        return None
    return {"means": s.means.tolist(), "scales": s.scales.tolist()}


def _std_from_dict(d) -> Standardization | None:
    if d is None:
        return None
    return Standardization(np.array(d["means"], dtype=float), np.array(d["scales"], dtype=float))


def to_dict(mf: ModelFile) -> dict:
    model = mf.model
    doc = {"format_version": FORMAT_VERSION, "mode": mf.mode, "metadata": mf.metadata}
    if isinstance(model, DrMarsModel):
        sdr = model.sdr
        doc["standardization"] = _std_to_dict(model.standardization)
        doc["sdr"] = {
            "directions": sdr.directions.tolist(),
            "eigenvalues": sdr.eigenvalues.tolist(),
            "chosen_d": sdr.chosen_d,
            "cv_table": None if sdr.cv_table is None else [list(row) for row in sdr.cv_table],
        }
        doc["input_dim"] = model.input_dim
        doc["inner"] = _mars_to_dict(model.inner)
    else:
        doc["standardization"] = _std_to_dict(mf.standardization)
        doc["sdr"] = None
        doc["input_dim"] = model.n_features
        doc["inner"] = _mars_to_dict(model)
    return doc


def from_dict(doc: dict) -> ModelFile:
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ModelFormatError("not a model file: missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {doc['format_version']!r} (expected {FORMAT_VERSION})")
    try:
        mode = doc["mode"]
        inner = _mars_from_dict(doc["inner"])
        std = _std_from_dict(doc["standardization"])
        meta = dict(doc.get("metadata") or {})
        if mode == MARS:
            return ModelFile(inner, std, meta)
        if mode not in (REDUCED, COMBINED):
            raise ModelFormatError(f"unknown mode {mode!r}")
        s = doc["sdr"]
        table = None if s["cv_table"] is None else tuple((int(d), float(v)) for d, v in s["cv_table"])
        sdr = SdrEstimate(np.array(s["directions"], dtype=float),
                          np.array(s["eigenvalues"], dtype=float), int(s["chosen_d"]), table)
        return ModelFile(DrMarsModel(sdr, inner, mode, int(doc["input_dim"]), std), None, meta)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def save_model(path, model, standardization: Standardization | None = None,
               metadata: dict | None = None):
    """Write ``model`` (a :class:`ModelFile`, MARS or drMARS model) as JSON."""
    mf = model if isinstance(model, ModelFile) else ModelFile(model, standardization, metadata or {})
    text = json.dumps(to_dict(mf), indent=1, allow_nan=True)
    with open(path, "w") as fh:
        fh.write(text)
        fh.write("\n")


def load_model(path) -> ModelFile:
    """Read a model file; raises :class:`ModelFormatError` on bad JSON or a version mismatch."""
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: cannot parse model file ({exc})") from exc
    return from_dict(doc)
