"""Symmetric eigendecomposition by cyclic Jacobi rotations and the
Moore-Penrose pseudo-inverse built on it. Intended for d <= 5."""
from __future__ import annotations

import numpy as np

SYM_TOL = 1e-12


def jacobi_eigh(M, tol: float = 1e-13, max_sweeps: int = 100):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a symmetric matrix."""
    A = np.array(M, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.max(np.abs(A)), 1e-300) if n else 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def check_symmetric(M, tol: float = SYM_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if np.max(np.abs(M - M.T), initial=0.0) > tol * max(1.0, np.max(np.abs(M), initial=0.0)):
        raise ValueError("matrix is not symmetric")
    return M


def pseudo_inverse(M, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix: invert eigenvalues above rcond * max|eig|."""
    M = check_symmetric(M)
    w, V = jacobi_eigh((M + M.T) / 2)
    top = np.max(np.abs(w), initial=0.0)
    inv = np.zeros_like(w)
    keep = np.abs(w) > rcond * top
    inv[keep] = 1.0 / w[keep]
    return (V * inv) @ V.T


def penrose_residuals(M, P, relative: bool = False) -> tuple[float, float, float, float]:
    """Max-abs residuals of M P M = M, P M P = P, (M P)^T = M P, (P M)^T = P M.

    With ``relative=True`` the first two are divided by the largest entry of
    M and P respectively (the other two involve projectors and stay as is).
    Rounding in P M P grows like eps * |P|^2 * |M|, so on ill-conditioned
    input only the relative form has a scale-free floor.
    """
    M, P = np.asarray(M, dtype=float), np.asarray(P, dtype=float)
    MP, PM = M @ P, P @ M
    r1 = float(np.max(np.abs(MP @ M - M), initial=0.0))
    r2 = float(np.max(np.abs(PM @ P - P), initial=0.0))
    if relative:
        r1 /= max(float(np.max(np.abs(M), initial=0.0)), 1e-300)
        r2 /= max(float(np.max(np.abs(P), initial=0.0)), 1e-300)
    return (r1, r2, float(np.max(np.abs(MP.T - MP), initial=0.0)),
            float(np.max(np.abs(PM.T - PM), initial=0.0)))


def det_sym(M) -> float:
    """Determinant as the product of Jacobi eigenvalues."""
    w, _ = jacobi_eigh(M)
    return float(np.prod(w))
