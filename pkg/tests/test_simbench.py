import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marsdr.errors import DataError, DimensionError
from marsdr.numerics import rng_stream
from marsdr.simbench import (MODELS, TRUE_DIM, MetricsReport, Record, SimSpec, gen_covariates, mcr,
                             mse_g, rmspe, run_replications, simulate, subspace_distance,
                             true_basis, true_regression)


def test_true_regression_values():
    assert true_regression("M4", [1, 1, 1, 0, 0]) == 5.0
    assert true_regression("M6", [1, 0, 0]) == 2.0
    assert true_regression("M7", [0, 7.3, 1]) == 0.0
    x = np.array([0.2, -0.4, 0.1])
    expected = 0.5 * (0.2 - 0.4) + 2.5 * math.exp(-2 * (0.2 - 0.4 + 0.1) ** 2)
    assert true_regression("M1", x) == pytest.approx(expected, rel=1e-15)
    with pytest.raises(DimensionError):
        true_regression("M2", [0.0] * 4)
    with pytest.raises(ValueError):
        true_regression("M9", [0.0] * 4)


def test_true_basis_shapes_and_m3():
    for m in MODELS:
        assert true_basis(m, 8).shape == (8, TRUE_DIM[m])
    B = true_basis("M3", 6)
    np.testing.assert_allclose(B[:, 3], [0, 0, 0, 2 / math.sqrt(5), 1 / math.sqrt(5), 0])
    np.testing.assert_array_equal(true_basis("M4", 5), np.eye(5)[:, :3])


@pytest.mark.parametrize("model_id", MODELS)
def test_true_basis_spans_gradient(model_id):
    p = 7
    rng = np.random.default_rng(0)
    B = true_basis(model_id, p)
    P = B @ np.linalg.solve(B.T @ B, B.T)
    h = 1e-5
    for _ in range(100):
        x = rng.uniform(-1, 1, p)
        u = rng.normal(size=p)
        u -= P @ u
        u /= np.linalg.norm(u)
        dd = (true_regression(model_id, x + h * u) - true_regression(model_id, x - h * u)) / (2 * h)
        assert abs(dd) <= 1e-6


def test_covariates():
    X = gen_covariates(SimSpec("M1", 5, 1000), rng_stream(0))
    assert np.all((X > -1) & (X < 1))
    G = gen_covariates(SimSpec("M1", 3, 10, covariate_dist="gaussian"), rng_stream(1), n=100_000)
    assert abs(np.corrcoef(G[:, 0], G[:, 1])[0, 1] - 0.6) < 0.01
    a = gen_covariates(SimSpec("M1", 4, 50), rng_stream(3))
    np.testing.assert_array_equal(a, gen_covariates(SimSpec("M1", 4, 50), rng_stream(3)))


def test_noise_level():
    spec = SimSpec("M6", 2, 100_000, n_test=1)
    X, y, _ = simulate(spec, 0)
    eps = y - true_regression("M6", X)
    assert abs(eps.std() - 0.5) < 0.01


def test_simulate_deterministic_and_distinct():
    spec = SimSpec("M2", 6, 40, n_test=10)
    a = simulate(spec, 3)
    b = simulate(spec, 3)
    c = simulate(spec, 4)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
    assert not np.array_equal(a[0], c[0])


def test_spec_validation():
    with pytest.raises(ValueError):
        SimSpec("M2", 4, 100)
    with pytest.raises(ValueError):
        SimSpec("M1", 5, 100, covariate_dist="cauchy")


def test_subspace_distance_examples():
    B = np.eye(3)[:, :2]
    assert subspace_distance(B, B) == 0.0
    assert subspace_distance(np.array([[0.0], [1.0]]), np.array([[1.0], [0.0]])) == 1.0
    s = 1 / math.sqrt(2)
    assert subspace_distance(np.array([[s], [s]]), np.array([[1.0], [0.0]])) == pytest.approx(s)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(1, 3), st.integers(0, 2**31))
def test_subspace_distance_invariances(p, d, seed):
    d = min(d, p)
    rng = np.random.default_rng(seed)
    Bh, _ = np.linalg.qr(rng.normal(size=(p, d)))
    B = rng.normal(size=(p, d))
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    A = rng.normal(size=(d, d)) + 3 * np.eye(d)
    base = subspace_distance(Bh, B)
    assert 0 <= base <= 1 + 1e-12
    assert abs(subspace_distance(Bh @ Q, B) - base) <= 1e-10
    assert abs(subspace_distance(Bh, B @ A) - base) <= 1e-10


def test_metric_identities():
    rng = np.random.default_rng(0)
    Z = rng.uniform(-1, 1, (200, 5))
    assert mse_g(lambda X: true_regression("M3", X), "M3", Z) == 0.0
    c = 0.37
    assert abs(mse_g(lambda X: true_regression("M3", X) + c, "M3", Z) - c * c) <= 1e-12
    y = rng.normal(size=30)
    assert rmspe(y, y, 0.3) == 0.0
    assert rmspe(np.full(30, 0.3), y, 0.3) == 1.0
    lab = np.array([0, 1, 1, 0])
    assert mcr(lab, lab) == 0.0
    assert mcr(1 - lab, lab) == 1.0
    assert mcr(np.array([0, 1, 0, 1]), lab) == 0.5
    with pytest.raises(DataError):
        mcr(np.array([2, 0]), np.array([0, 0]))


def test_report_aggregates_and_csv(tmp_path):
    spec = SimSpec("M6", 4, 60, n_test=50, replications=2)
    report = MetricsReport(spec, ("mars", "drmars_auto_d"))
    report.records += [Record(0, "mars", math.nan, 0.2, 1.0), Record(1, "mars", math.nan, 0.4, 1.0),
                       Record(0, "drmars_auto_d", math.nan, 0.1, 2.0, 2),
                       Record(1, "drmars_auto_d", math.nan, 0.3, 2.0, 3)]
    agg = report.aggregate()
    assert agg["mars"]["mse_mean"] == pytest.approx(0.3)
    assert agg["drmars_auto_d"]["correct_d_rate"] == 0.5
    text = report.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == text
    assert "seconds" not in text.splitlines()[0]
    assert "seconds" in report.to_csv(timing=True).splitlines()[0]


def test_run_replications_small_and_deterministic():
    spec = SimSpec("M6", 4, 80, n_test=100, replications=2)
    methods = ("mars", "drmars_fixed_d", "combined")
    a = run_replications(spec, methods)
    b = run_replications(spec, methods)
    assert a.to_csv() == b.to_csv()
    assert len(a.records) == 6 and not a.failures
    c = run_replications(spec, methods, threads=2)
    assert c.to_csv() == a.to_csv()
    with pytest.raises(ValueError):
        run_replications(spec, ("svm",))
