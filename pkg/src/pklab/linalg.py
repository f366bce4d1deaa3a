"""Dense symmetric eigensolvers: cyclic Jacobi and the Cholesky-reduced pencil."""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConditioningError


def jacobi_eigh(A, tol=1e-14, max_sweeps=60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, orthonormal eigenvectors as columns).
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("square matrix required")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n == 1 or scale == 0.0:
        return np.diag(A).copy(), V
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * scale:
                    A[p, q] = A[q, p] = 0.0
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                cp = A[:, p].copy()
                cq = A[:, q]
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp = A[p, :].copy()
                rq = A[q, :]
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise ConditioningError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def generalized_eigh(M, B):
    """Solve M w = lam B w for symmetric M and symmetric positive definite B.

    Factors B = L L^T, diagonalises L^-1 M L^-T with Jacobi rotations, and
    maps the eigenvectors back.  Eigenvectors W satisfy W^T B W = I.
    """
    M = np.asarray(M, dtype=float)
    B = np.asarray(B, dtype=float)
    try:
        L = np.linalg.cholesky(0.5 * (B + B.T))
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("right-hand matrix is not positive definite") from exc
    if np.min(np.abs(np.diag(L))) <= 1e-14 * np.max(np.abs(np.diag(L))):
        raise ConditioningError("right-hand matrix is numerically singular")
    Y = solve_triangular(L, 0.5 * (M + M.T), lower=True)
    C = solve_triangular(L, Y.T, lower=True)
    lam, Z = jacobi_eigh(0.5 * (C + C.T))
    W = solve_triangular(L.T, Z, lower=False)
    return lam, W
