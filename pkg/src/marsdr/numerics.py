"""Dense linear algebra and seeded random streams used throughout the package.

Matrices are plain ``numpy.ndarray`` objects; the helpers here validate them
on entry (finite entries, matching shapes) and return fresh arrays.
"""

from __future__ import annotations

import hashlib
from typing import NamedTuple

import numpy as np
from scipy import linalg as sla

from .errors import DataError, DimensionError, NumericalError

RANK_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class EigenResult(NamedTuple):
    """Eigenvalues in non-increasing order and matching unit eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float array (a copy is not guaranteed)."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def solve_least_squares(design, response, rel_tol: float = RANK_TOL) -> np.ndarray:
    """Minimum-residual coefficients via column-pivoted QR.

    Pivots with ``|R_kk| <= rel_tol * |R_00|`` are treated as zero and the
    matching coefficients are set to 0 (the basic solution). Fitted values
    are therefore the orthogonal projection of ``response`` onto the column
    space, also for rank-deficient designs.
    """
    A = as_matrix(design, "design")
    y = as_vector(response, "response")
    n, m = A.shape
    if n < 1 or m < 1:
        raise DimensionError(f"design must be non-empty, got shape {A.shape}")
    if y.shape[0] != n:
        raise DimensionError(f"design has {n} rows but response has {y.shape[0]}")

    Q, R, piv = sla.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    coef = np.zeros(m)
    if diag.size == 0 or diag[0] == 0.0:
        return coef
    rank = int(np.sum(diag > rel_tol * diag[0]))
    z = sla.solve_triangular(R[:rank, :rank], Q[:, :rank].T @ y, lower=False)
    coef[piv[:rank]] = z
    return coef


def sym_eigen(S, tol: float = JACOBI_TOL) -> EigenResult:
    """Full eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius mass drops below
    ``tol * ||S||_F``. Eigenvalues are returned in non-increasing order.
    """
    A = as_matrix(S, "S")
    p = A.shape[0]
    if A.shape[1] != p:
        raise DimensionError(f"S must be square, got shape {A.shape}")
    norm = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > 1e-10 * norm:
        raise DataError("S is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(p)

    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))
        if off <= tol * norm:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = A[i, j]
                if aij == 0.0:
                    continue
                diff = A[j, j] - A[i, i]
                if abs(aij) < 1e-36 * abs(diff):
                    t = aij / diff
                else:
                    theta = diff / (2.0 * aij)
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ai = A[:, i].copy()
                A[:, i] = c * ai - s * A[:, j]
                A[:, j] = s * ai + c * A[:, j]
                ai = A[i, :].copy()
                A[i, :] = c * ai - s * A[j, :]
                A[j, :] = s * ai + c * A[j, :]
                A[i, j] = A[j, i] = 0.0
                vi = V[:, i].copy()
                V[:, i] = c * vi - s * V[:, j]
                V[:, j] = s * vi + c * V[:, j]
    else:
        raise NumericalError("Jacobi eigen-solver did not converge")

    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    vectors = V[:, order]
    vectors /= np.linalg.norm(vectors, axis=0)
    return EigenResult(values[order], vectors)


def cholesky_lower(S) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == S`` for symmetric positive definite ``S``."""
    A = as_matrix(S, "S")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"S must be square, got shape {A.shape}")
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite") from exc


def stream_key(*parts) -> int:
    """Stable 63-bit integer derived from ``parts`` (independent of PYTHONHASHSEED)."""
    text = "|".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little") >> 1


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator for the ``(seed, stream_id)`` pair.

    Distinct ``stream_id`` values spawn independent children of the same
    seed sequence, so parallel replications never share a stream.
    """
    if seed < 0 or stream_id < 0:
        raise ValueError("seed and stream_id must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))
