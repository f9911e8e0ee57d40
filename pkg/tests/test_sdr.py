import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marsdr.basis import PLUS, BasisTerm, HingeFactor
from marsdr.errors import DataError
from marsdr.mars import MarsConfig, MarsModel, fit
from marsdr.sdr import (SdrEstimate, estimate_gradients, fit_sdr, fold_assignment, opg_eigen,
                        opg_matrix, sdr_directions, select_dimension)
from marsdr.simbench import subspace_distance


def projector(B):
    Q, _ = np.linalg.qr(B)
    return Q @ Q.T


def test_gradient_examples():
    m0 = MarsModel((), np.array([1.0]), 0.0, 0.0, 5, 3)
    np.testing.assert_array_equal(estimate_gradients(m0, np.ones((4, 3))), np.zeros((4, 3)))
    m1 = MarsModel((BasisTerm((HingeFactor(0, 0.0, PLUS),)),), np.array([0.0, 3.0]), 0.0, 0.0, 5, 3)
    np.testing.assert_array_equal(estimate_gradients(m1, np.array([[0.5, 1.0, 2.0]])), [[3, 0, 0]])


def test_gradient_linear_in_coefficients():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (100, 3))
    model = fit(X, X[:, 0] * X[:, 1] + rng.normal(size=100) * 0.1)
    c1 = rng.normal(size=model.coefficients.size)
    c2 = rng.normal(size=model.coefficients.size)

    def with_coef(c):
        return MarsModel(model.terms, c, 0.0, 0.0, 100, 3)

    np.testing.assert_allclose(estimate_gradients(with_coef(c1 + c2), X),
                               estimate_gradients(with_coef(c1), X)
                               + estimate_gradients(with_coef(c2), X), atol=1e-12)


def test_opg_examples():
    np.testing.assert_array_equal(opg_matrix(np.tile([1.0, 2.0], (5, 1))), [[1, 2], [2, 4]])
    np.testing.assert_array_equal(opg_matrix(np.eye(2)), np.diag([0.5, 0.5]))
    np.testing.assert_array_equal(opg_matrix(np.zeros((3, 4))), np.zeros((4, 4)))
    with pytest.raises(DataError):
        opg_matrix(np.zeros((0, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 8), st.integers(0, 2**31))
def test_opg_symmetric_psd(n, p, seed):
    G = np.random.default_rng(seed).normal(size=(n, p)) * 10
    S = opg_matrix(G)
    assert np.array_equal(S, S.T)
    est = sdr_directions(S, p)
    assert est.eigenvalues.min() >= -1e-10 * (1 + est.eigenvalues.max())
    np.testing.assert_allclose(est.directions.T @ est.directions, np.eye(p), atol=1e-8)
    for j in range(p):
        lam, v = est.eigenvalues[j], est.directions[:, j]
        assert np.linalg.norm(S @ v - lam * v) <= 1e-8 * (1 + lam)


def test_sdr_directions_examples():
    est = sdr_directions(np.diag([5.0, 2.0, 0.1]), 2)
    np.testing.assert_allclose(est.directions, np.eye(3)[:, :2], atol=1e-15)
    np.testing.assert_allclose(est.eigenvalues, [5, 2, 0.1])
    b = np.array([0.6, 0.8])
    est = sdr_directions(np.outer(b, b), 1)
    np.testing.assert_allclose(est.directions[:, 0], b, atol=1e-12)


def test_sign_convention():
    est = sdr_directions(np.outer([-0.6, -0.8], [-0.6, -0.8]), 1)
    assert est.directions[1, 0] > 0


def test_near_degenerate_top_pair_span():
    rng = np.random.default_rng(1)
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    S = Q @ np.diag([4.0, 4.0 - 1e-9, 1.0, 0.5, 0.2, 0.0]) @ Q.T
    S = 0.5 * (S + S.T)
    est = sdr_directions(S, 2)
    w, V = np.linalg.eigh(S)
    oracle = V[:, -2:]
    assert np.linalg.norm(projector(est.directions) - projector(oracle)) <= 1e-6


def test_estimate_invariants():
    with pytest.raises(ValueError):
        sdr_directions(np.eye(3), 4)
    with pytest.raises(Exception):
        SdrEstimate(np.eye(3), np.ones(3), 2)


def test_single_index_recovery():
    rng = np.random.default_rng(0)
    beta = rng.normal(size=10)
    beta /= np.linalg.norm(beta)
    X = rng.normal(size=(1000, 10))
    y = 2 * X @ beta + 0.05 * rng.normal(size=1000)
    est = fit_sdr(X, y, 1)
    assert subspace_distance(est.directions, beta[:, None]) <= 0.1


def test_constant_response_degenerate():
    X = np.random.default_rng(2).normal(size=(50, 4))
    _, eig = opg_eigen(X, np.ones(50))
    assert np.all(np.abs(eig.values) <= 1e-10)
    np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(4), atol=1e-12)


def test_fold_assignment():
    folds = fold_assignment(53, 10, 4)
    assert len(folds) == 10
    assert [len(f) for f in folds] == [5] * 9 + [8]
    np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(53))
    again = fold_assignment(53, 10, 4)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))
    with pytest.raises(DataError):
        fold_assignment(15, 10, 0)


def test_select_dimension_dmax_one():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 3))
    d, table = select_dimension(X, X[:, 0] + 0.1 * rng.normal(size=60), d_max=1)
    assert d == 1 and len(table) == 1 and table[0][0] == 1


@pytest.mark.slow
@pytest.mark.xfail(reason="CV R^2 gaps between d=1 and d=2 are ~1e-3; argmax picks d=2 in about "
                          "half the runs because the extra direction absorbs the small error "
                          "in the estimated index", strict=False)
def test_select_dimension_single_index():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        beta = np.zeros(10)
        beta[:2] = [0.6, 0.8]
        X = rng.normal(size=(500, 10))
        y = (X @ beta) ** 2 + 0.01 * rng.normal(size=500)
        d, _ = select_dimension(X, y, d_max=5, seed=seed)
        hits += d == 1
    assert hits >= 8


def test_select_dimension_threads_agree():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(120, 4))
    y = X[:, 0] * X[:, 1] + 0.1 * rng.normal(size=120)
    cfg = MarsConfig(max_terms=9)
    assert select_dimension(X, y, 3, 5, cfg) == select_dimension(X, y, 3, 5, cfg, threads=2)


def test_select_dimension_per_fold_flag():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(100, 3))
    y = X[:, 0] + 0.1 * rng.normal(size=100)
    d, table = select_dimension(X, y, 2, 5, MarsConfig(max_terms=7), per_fold_directions=True)
    assert d in (1, 2) and len(table) == 2
