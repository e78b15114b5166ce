"""Dense two-phase primal simplex for small equality-form LPs.

    maximize c @ x   subject to   A @ x = b,  x >= 0

Bland's smallest-index rule is used for both entering and leaving variables,
so the method terminates on degenerate problems. Sizes here are a handful of
rows and columns; the code favours exactness over speed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    value: float | None = None
    basis: tuple[int, ...] = ()
    redundant_rows: tuple[int, ...] = ()
    iterations: int = 0


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    for i in range(T.shape[0]):
        if i != r and T[i, c] != 0.0:
            T[i] -= T[i, c] * T[r]
    T[:, c] = 0.0
    T[r, c] = 1.0


def _run(T: np.ndarray, basis: list[int], ncols: int, tol: float, max_iter: int) -> tuple[str, int]:
    """Minimize the objective whose reduced costs sit in the last row of T.

    Only the first ``ncols`` columns may enter.
    """
    m = T.shape[0] - 1
    for it in range(max_iter):
        cost = T[-1, :ncols]
        entering = next((j for j in range(ncols) if cost[j] < -tol), None)
        if entering is None:
            return "optimal", it
        col = T[:m, entering]
        rows = [i for i in range(m) if col[i] > tol]
        if not rows:
            return "unbounded", it
        ratios = [T[i, -1] / col[i] for i in rows]
        best = min(ratios)
        ties = [i for i, r in zip(rows, ratios) if r <= best + tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda i: basis[i])
        _pivot(T, leave, entering)
        basis[leave] = entering
    raise RuntimeError("simplex iteration limit reached")


def linprog_eq(c, A, b, tol: float = PIVOT_TOL, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A1, b1 = A * sign[:, None], b * sign

    # phase 1: artificials n..n+m-1, minimize their sum
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A1
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b1
    T[-1, :n] = -A1.sum(axis=0)
    T[-1, -1] = -b1.sum()
    basis = list(range(n, n + m))
    _, it1 = _run(T, basis, n + m, tol, max_iter)
    scale = max(1.0, float(np.max(np.abs(b1))) if m else 1.0)
    if -T[-1, -1] > 1e3 * tol * scale:
        return LPResult("infeasible", iterations=it1)

    # drive artificials out of the basis; rows that cannot be pivoted are redundant
    rows = list(range(m))
    i = 0
    while i < len(rows):
        if basis[i] >= n:
            j = next((j for j in range(n) if abs(T[i, j]) > tol), None)
            if j is None:
                T = np.delete(T, i, axis=0)
                del basis[i]
                del rows[i]
                continue
            _pivot(T, i, j)
            basis[i] = j
        i += 1
    redundant = tuple(sorted(set(range(m)) - set(rows)))

    # phase 2 on the original columns
    k = len(rows)
    T2 = np.zeros((k + 1, n + 1))
    T2[:k, :n] = T[:k, :n]
    T2[:k, -1] = T[:k, -1]
    cost = -c
    T2[-1, :n] = cost
    for r, j in enumerate(basis):
        T2[-1] -= cost[j] * T2[r]
    status, it2 = _run(T2, basis, n, tol, max_iter)
    if status != "optimal":
        return LPResult(status, iterations=it1 + it2)

    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T2[r, -1]
    x[np.abs(x) < tol] = 0.0
    duals = np.zeros(m)
    if k:
        B = A[np.ix_(rows, basis)]
        duals[rows] = np.linalg.solve(B.T, c[basis])
    return LPResult("optimal", x=x, duals=duals, value=float(c @ x), basis=tuple(basis),
                    redundant_rows=redundant, iterations=it1 + it2)
