"""Slow, independent reference implementations used only by the tests."""

import numpy as np

from marsdr.basis import MINUS, PLUS, BasisTerm, HingeFactor, candidate_knots, design_matrix


def pinv_fitted(A, y, rel_tol=1e-12):
    """Fitted values from a pseudo-inverse of the normal equations (eigen route)."""
    A = np.asarray(A, dtype=float)
    G = A.T @ A
    w, V = np.linalg.eigh(G)
    keep = w > rel_tol * max(w.max(), 1e-300)
    inv = (V[:, keep] / w[keep]) @ V[:, keep].T
    return A @ (inv @ (A.T @ y))


def hinge_scalar(var, knot, sign, x):
    return max(sign * (x[var] - knot), 0.0)


def term_scalar(term: BasisTerm, x):
    out = 1.0
    for f in term.factors:
        out *= hinge_scalar(f.var, f.knot, f.sign, x)
    return out


def predict_loop(terms, coef, X):
    return np.array([coef[0] + sum(c * term_scalar(t, x) for c, t in zip(coef[1:], terms))
                     for x in np.asarray(X, dtype=float)])


def central_diff(fn, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def naive_forward(X, y, cfg):
    """Forward pass by brute-force refits of every candidate pair."""
    n, p = X.shape
    max_terms = cfg.resolve_max_terms(n, p)
    endspan = cfg.resolve_endspan(n)
    sst = float(np.sum((y - y.mean()) ** 2))
    terms, pool = [], [BasisTerm()]
    rss = sst
    if np.ptp(y) == 0:
        return terms
    while len(terms) + 1 < max_terms:
        H = design_matrix(terms, X)
        cands = []
        for v in range(p):
            for j, parent in enumerate(pool):
                if parent.degree >= cfg.max_degree or v in parent.variables:
                    continue
                b = parent.values(X)
                for t in candidate_knots(X, v, b != 0, cfg.minspan, endspan):
                    D = np.column_stack([H, b * np.maximum(X[:, v] - t, 0),
                                         b * np.maximum(t - X[:, v], 0)])
                    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
                    r = y - D @ coef
                    cands.append((v, float(t), j, float(r @ r)))
        if not cands:
            break
        cands.sort(key=lambda c: (c[0], c[1], c[2]))
        best_rss = min(c[3] for c in cands)
        v, t, j, s = next(c for c in cands if c[3] <= best_rss + 1e-12 * sst)
        if rss - s <= cfg.forward_tol * rss:
            break
        for sign in (PLUS, MINUS):
            term = pool[j].times(HingeFactor(v, t, sign))
            terms.append(term)
            pool.append(term)
        rss = s
    return terms
