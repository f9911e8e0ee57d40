"""Synthetic regression models M1-M7, evaluation metrics and a seeded replication harness."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import drmars, mars
from .errors import DataError, DimensionError
from .numerics import as_matrix, cholesky_lower, rng_stream, stream_key, sym_eigen
from .sdr import directions_from_eigen, opg_matrix

log = logging.getLogger(__name__)

MODELS = ("M1", "M2", "M3", "M4", "M5", "M6", "M7")
MIN_VARS = {"M1": 3, "M2": 5, "M3": 5, "M4": 3, "M5": 3, "M6": 2, "M7": 2}
TRUE_DIM = {"M1": 2, "M2": 3, "M3": 4, "M4": 3, "M5": 2, "M6": 2, "M7": 2}
DISTRIBUTIONS = ("uniform", "gaussian")
METHODS = ("mars", "drmars_fixed_d", "drmars_auto_d", "combined")


@dataclass(frozen=True)
class SimSpec:
    model_id: str
    p: int
    n_train: int
    n_test: int = 1000
    covariate_dist: str = "uniform"
    noise_sd: float = 0.5
    seed: int = 0
    replications: int = 20

    def __post_init__(self):
        if self.model_id not in MIN_VARS:
            raise ValueError(f"unknown model {self.model_id!r}")
        if self.p < MIN_VARS[self.model_id]:
            raise ValueError(f"{self.model_id} needs p >= {MIN_VARS[self.model_id]}")
        if self.covariate_dist not in DISTRIBUTIONS:
            raise ValueError(f"covariate_dist must be one of {DISTRIBUTIONS}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if self.n_train < 3 or self.n_test < 1 or self.replications < 1:
            raise ValueError("n_train >= 3, n_test >= 1 and replications >= 1 required")

    @property
    def true_dim(self) -> int:
        return TRUE_DIM[self.model_id]

    def stream_id(self, replication: int) -> int:
        return stream_key(self.model_id, self.p, self.n_train, self.n_test,
                          self.covariate_dist, self.noise_sd, replication)


def covariance(p: int, rho: float = 0.6) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_covariates(spec: SimSpec, stream: np.random.Generator, n: int | None = None) -> np.ndarray:
    n = spec.n_train if n is None else n
    if spec.covariate_dist == "uniform":
        X = stream.uniform(-1.0, 1.0, size=(n, spec.p))
        # uniform() samples [-1, 1); keep the open interval
        while np.any(X == -1.0):
            bad = X == -1.0
            X[bad] = stream.uniform(-1.0, 1.0, size=int(bad.sum()))
        return X
    L = cholesky_lower(covariance(spec.p))
    return stream.standard_normal((n, spec.p)) @ L.T


def _regression(model_id: str, X: np.ndarray) -> np.ndarray:
    x = [X[:, j] for j in range(MIN_VARS[model_id])]
    if model_id == "M1":
        return 0.5 * (x[0] + x[1]) + 2.5 * np.exp(-2.0 * (x[0] + x[1] + x[2]) ** 2)
    if model_id == "M2":
        return (np.exp(4.0 * x[0]) / 30.0
                + 4.0 / (3.0 + 3.0 * np.exp(-20.0 * (x[1] - 0.5)))
                + (3.0 * x[2] + 2.0 * x[3] + x[4]) / 3.0)
    if model_id == "M3":
        return (0.6 * np.sin(np.pi * x[0] * x[1]) + 1.2 * (x[2] - 0.5) ** 2
                + 0.6 * x[3] + 0.3 * x[4])
    if model_id == "M4":
        return 5.0 * x[0] * x[1] * x[2]
    if model_id == "M5":
        return 4.0 * (x[0] - x[1] + x[2]) * np.sin(0.5 * np.pi * (x[0] + x[1]))
    if model_id == "M6":
        return x[0] * (x[0] + x[1] + 1.0)
    return x[0] / (0.5 + (x[1] + 1.5) ** 2)


def true_regression(model_id: str, x):
    """Noise-free regression function; a vector gives a float, a matrix one value per row."""
    if model_id not in MIN_VARS:
        raise ValueError(f"unknown model {model_id!r}")
    arr = np.asarray(x, dtype=float)
    X = arr.reshape(1, -1) if arr.ndim == 1 else arr
    if X.shape[1] < MIN_VARS[model_id]:
        raise DimensionError(f"{model_id} needs at least {MIN_VARS[model_id]} covariates")
    out = _regression(model_id, X)
    return float(out[0]) if arr.ndim == 1 else out


def true_basis(model_id: str, p: int) -> np.ndarray:
    """A spanning matrix (not necessarily orthonormal) of the central mean subspace."""
    if model_id not in MIN_VARS:
        raise ValueError(f"unknown model {model_id!r}")
    if p < MIN_VARS[model_id]:
        raise DimensionError(f"{model_id} needs p >= {MIN_VARS[model_id]}")
    cols = {
        "M1": [[1, 1, 0], [1, 1, 1]],
        "M2": [[1], [0, 1], [0, 0, 3, 2, 1]],
        "M3": [[1], [0, 1], [0, 0, 1], [0, 0, 0, 2 / math.sqrt(5), 1 / math.sqrt(5)]],
        "M4": [[1], [0, 1], [0, 0, 1]],
        "M5": [[1, -1, 1], [1, 1]],
        "M6": [[1], [1, 1]],
        "M7": [[1], [0, 1]],
    }[model_id]
    B = np.zeros((p, len(cols)))
    for j, c in enumerate(cols):
        B[: len(c), j] = c
    return B


def subspace_distance(B_hat, B_true) -> float:
    """``||(I - B (B^T B)^{-1} B^T) B_hat||_F / sqrt(d)``."""
    Bh = as_matrix(B_hat, "B_hat")
    B = as_matrix(B_true, "B_true")
    if Bh.shape != B.shape:
        raise DimensionError(f"shapes differ: {Bh.shape} vs {B.shape}")
    gram = B.T @ B
    if np.linalg.matrix_rank(B) < B.shape[1]:
        raise DataError("B_true is rank deficient")
    resid = Bh - B @ np.linalg.solve(gram, B.T @ Bh)
    return float(np.linalg.norm(resid) / math.sqrt(B.shape[1]))


def mse_g(predict_fn, model_id: str, X_test) -> float:
    X = as_matrix(X_test, "X_test")
    if X.shape[0] < 1:
        raise DataError("X_test is empty")
    err = np.asarray(predict_fn(X), dtype=float) - true_regression(model_id, X)
    return float(np.mean(err ** 2))


def rmspe(y_hat_test, y_test, y_train_mean: float) -> float:
    """Relative mean squared prediction error against the training-mean predictor."""
    y_hat = np.asarray(y_hat_test, dtype=float)
    y = np.asarray(y_test, dtype=float)
    if y_hat.shape != y.shape:
        raise DimensionError("y_hat_test and y_test differ in length")
    denom = float(np.sum((y_train_mean - y) ** 2))
    if denom == 0.0:
        raise DataError("test responses all equal the training mean")
    return float(np.sum((y_hat - y) ** 2)) / denom


def mcr(labels_hat, labels_true) -> float:
    a = np.asarray(labels_hat)
    b = np.asarray(labels_true)
    if a.shape != b.shape:
        raise DimensionError("label vectors differ in length")
    for lab in (a, b):
        if not np.all((lab == 0) | (lab == 1)):
            raise DataError("labels must be 0 or 1")
    return float(np.mean(a != b))


@dataclass(frozen=True)
class Record:
    replication: int
    method: str
    D: float
    mse: float
    seconds: float
    chosen_d: int | None = None


@dataclass
class MetricsReport:
    spec: SimSpec
    methods: tuple[str, ...]
    records: list[Record] = field(default_factory=list)
    failures: list[tuple[int, str, str]] = field(default_factory=list)

    def method_records(self, method: str) -> list[Record]:
        return [r for r in self.records if r.method == method]

    def aggregate(self) -> dict[str, dict[str, float]]:
        out = {}
        for m in self.methods:
            recs = self.method_records(m)
            if not recs:
                continue
            D = np.array([r.D for r in recs])
            mse = np.array([r.mse for r in recs])
            secs = np.array([r.seconds for r in recs])
            row = {
                "count": len(recs),
                "D_mean": float(np.mean(D)) if np.all(np.isfinite(D)) else math.nan,
                "D_sd": float(np.std(D, ddof=1)) if len(recs) > 1 and np.all(np.isfinite(D)) else math.nan,
                "mse_mean": float(np.mean(mse)),
                "mse_sd": float(np.std(mse, ddof=1)) if len(recs) > 1 else math.nan,
                "seconds_mean": float(np.mean(secs)),
            }
            dims = [r.chosen_d for r in recs if r.chosen_d is not None]
            if dims:
                row["correct_d_rate"] = float(np.mean(np.array(dims) == self.spec.true_dim))
            out[m] = row
        return out

    def to_csv(self, path=None, timing: bool = False) -> str:
        """One row per replication and method; wall time only with ``timing=True``."""
        s = self.spec
        header = ["model_id", "p", "n", "m", "dist", "noise_sd", "seed", "replication",
                  "method", "D", "mse"] + (["seconds"] if timing else []) + ["chosen_d"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in self.records:
            row = [s.model_id, s.p, s.n_train, s.n_test, s.covariate_dist, repr(s.noise_sd),
                   s.seed, r.replication, r.method, _fmt(r.D), _fmt(r.mse)]
            if timing:
                row.append(_fmt(r.seconds))
            row.append("" if r.chosen_d is None else r.chosen_d)
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> str:
        s = self.spec
        lines = [f"{s.model_id} {s.covariate_dist} p={s.p} n={s.n_train} m={s.n_test} "
                 f"reps={s.replications} seed={s.seed}",
                 f"{'method':<16}{'D mean':>9}{'D sd':>8}{'MSE mean':>10}{'MSE sd':>8}"
                 f"{'secs':>8}{'P(d=d0)':>9}"]
        for m, a in self.aggregate().items():
            lines.append(f"{m:<16}{a['D_mean']:>9.3f}{a['D_sd']:>8.3f}{a['mse_mean']:>10.3f}"
                         f"{a['mse_sd']:>8.3f}{a['seconds_mean']:>8.2f}"
                         f"{a.get('correct_d_rate', math.nan):>9.2f}")
        if self.failures:
            lines.append(f"failed replications: {len(self.failures)}")
        return "\n".join(lines)


def _fmt(v: float) -> str:
    return "" if v is None or not math.isfinite(v) else f"{v:.17g}"


def simulate(spec: SimSpec, replication: int):
    """Training data ``(X, y)`` and test covariates for one replication."""
    stream = rng_stream(spec.seed, spec.stream_id(replication))
    X = gen_covariates(spec, stream)
    y = true_regression(spec.model_id, X) + spec.noise_sd * stream.standard_normal(spec.n_train)
    Z = gen_covariates(spec, stream, spec.n_test)
    return X, y, Z


def run_replication(spec: SimSpec, replication: int, methods, cfg: mars.MarsConfig):
    """Fit every requested method on one simulated sample; returns ``(records, failures)``."""
    X, y, Z = simulate(spec, replication)
    d0 = spec.true_dim
    B0 = true_basis(spec.model_id, spec.p)
    records, failures = [], []
    try:
        t0 = time.perf_counter()
        base = mars.fit(X, y, cfg)
        t_mars = time.perf_counter() - t0
        eig = sym_eigen(opg_matrix(base.gradient(X)))
        t_opg = time.perf_counter() - t0
    except Exception as exc:  # noqa: BLE001 - recorded, excluded from aggregates
        return records, [(replication, m, repr(exc)) for m in methods]

    fixed = directions_from_eigen(eig, d0)
    D_fixed = subspace_distance(fixed.directions, B0)
    for method in methods:
        try:
            t0 = time.perf_counter()
            if method == "mars":
                model, D, chosen, extra = base, math.nan, None, t_mars
            elif method == "drmars_fixed_d":
                model = drmars.fit_drmars(X, y, d0, cfg, opg=eig)
                D, chosen, extra = D_fixed, None, t_opg
            elif method == "drmars_auto_d":
                cv_seed = spec.stream_id(replication) % (2 ** 32)
                model = drmars.fit_drmars(X, y, "auto", cfg, seed=cv_seed, opg=eig)
                D, chosen, extra = math.nan, model.sdr.chosen_d, t_opg
            elif method == "combined":
                model = drmars.fit_combined(X, y, d0, cfg, opg=eig)
                D, chosen, extra = D_fixed, None, t_opg
            else:
                raise ValueError(f"unknown method {method!r}")
            secs = time.perf_counter() - t0 + extra
            records.append(Record(replication, method, D, mse_g(model.predict, spec.model_id, Z),
                                  secs, chosen))
        except Exception as exc:  # noqa: BLE001
            failures.append((replication, method, repr(exc)))
    return records, failures


def _run_packed(args):
    return run_replication(*args)


def run_replications(spec: SimSpec, methods=METHODS, cfg: mars.MarsConfig = mars.MarsConfig(),
                     threads: int = 1) -> MetricsReport:
    """Run ``spec.replications`` seeded replications; results are independent of ``threads``."""
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    jobs = [(spec, r, methods, cfg) for r in range(spec.replications)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_packed, jobs))
    else:
        results = [_run_packed(job) for job in jobs]
    report = MetricsReport(spec, methods)
    for recs, fails in results:
        report.records.extend(recs)
        report.failures.extend(fails)
    if report.failures:
        log.warning("%d replication/method fits failed", len(report.failures))
    return report
