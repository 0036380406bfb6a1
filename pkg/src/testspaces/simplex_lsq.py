"""Least squares over the probability simplex.

Solves ``min ||A w - b||`` subject to ``w >= 0`` and ``sum(w) == 1`` with a
Lawson-Hanson style active-set method; each working-set subproblem eliminates
the sum constraint and is solved by ``lstsq`` on ``A`` directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

__all__ = ["SimplexLSQResult", "simplex_lsq", "unique_minimizer"]


@dataclass
class SimplexLSQResult:
    weights: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _solve_on(A, b, active):
    """Minimise over weights supported on ``active`` summing to one (signs free)."""
    if len(active) == 1:
        return np.array([1.0])
    last = A[:, active[-1]]
    rest = A[:, active[:-1]] - last[:, None]
    y, *_ = np.linalg.lstsq(rest, b - last, rcond=None)
    return np.append(y, 1.0 - y.sum())


def simplex_lsq(A, b, max_iter: int = 100_000, tol: float = 1e-12) -> SimplexLSQResult:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m = A.shape[1]
    if m == 0:
        raise ValueError("no candidate columns")
    scale = max(1.0, float(np.abs(A.T @ b).max()))
    grad_tol = tol * scale * 1e3

    # start from the best single column; argmin picks the lowest index on ties
    single = np.linalg.norm(A - b[:, None], axis=0)
    j0 = int(np.argmin(single))
    w = np.zeros(m)
    w[j0] = 1.0
    active = [j0]
    blocked: set[int] = set()
    objective = float(single[j0])
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        g = A.T @ (A @ w - b)
        lam = float(np.mean(g[active]))
        reduced = g - lam
        reduced[active] = 0.0
        reduced[list(blocked)] = 0.0
        j = int(np.argmin(reduced))
        if reduced[j] >= -grad_tol:
            converged = True
            break
        active = sorted(active + [j])
        for _ in range(m + 1):
            z = _solve_on(A, b, active)
            if np.all(z > 0.0):
                w = np.zeros(m)
                w[active] = z
                break
            cur = w[active]
            blocking = z <= 0.0
            alpha = float(np.min(cur[blocking] / (cur[blocking] - z[blocking])))
            cur = cur + alpha * (z - cur)
            keep = cur > tol
            active = [k for k, flag in zip(active, keep) if flag]
            w = np.zeros(m)
            w[active] = cur[keep]
            w /= w.sum()
        new_objective = float(np.linalg.norm(A @ w - b))
        if new_objective < objective - tol:
            blocked.clear()
        elif j not in active:
            # degenerate pivot: the entering column could not be used
            blocked.add(j)
        objective = min(objective, new_objective)
    residual = float(np.linalg.norm(A @ w - b))
    return SimplexLSQResult(w, residual, iterations, converged)


def unique_minimizer(A, weights, tol: float = 1e-9) -> bool:
    """Whether ``weights`` is the only simplex point reaching ``A @ weights``.

    Columns on the support must be independent, and no feasible direction
    may move mass onto a column outside the support without changing the
    fitted value; the latter is settled by a small LP.
    """
    A = np.asarray(A, dtype=float)
    support = np.flatnonzero(weights > 0)
    if np.linalg.matrix_rank(A[:, support], tol=tol * max(1.0, np.abs(A).max())) < support.size:
        return False
    outside = np.setdiff1d(np.arange(A.shape[1]), support)
    if outside.size == 0:
        return True
    # A d = 0 restated through the triangular factor of A
    _, r = np.linalg.qr(A, mode="reduced")
    eq = np.vstack([r, np.ones((1, A.shape[1]))])
    bounds = [(-1.0, 1.0) if k in set(support) else (0.0, 1.0) for k in range(A.shape[1])]
    c = np.zeros(A.shape[1])
    c[outside] = -1.0
    res = linprog(c, A_eq=eq, b_eq=np.zeros(eq.shape[0]), bounds=bounds, method="highs")
    if res.status != 0:
        return False
    return -res.fun <= tol
