"""Small symmetric eigenproblems (d <= 3) by cyclic Jacobi rotations."""

import math

import numpy as np

JACOBI_TOL = 1e-13
MAX_SWEEPS = 50


def off_norm(a: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part (summed directly, no cancellation)."""
    off = a - np.diag(np.diag(a))
    return math.sqrt(float(np.sum(off * off)))


def jacobi_eigh(matrix, tol: float = JACOBI_TOL):
    """Eigen-decomposition of a symmetric matrix.

    Sweeps over the upper triangle until the off-diagonal Frobenius norm is
    below ``tol`` times the matrix norm. Returns ``(eigenvalues, vectors)``
    with eigenvalues ascending and eigenvectors in the columns.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = math.sqrt(float(np.sum(a * a)))
    if scale == 0.0:
        return np.zeros(n), v

    for _ in range(MAX_SWEEPS):
        if off_norm(a) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # Rotation angle from the stable small-root formula; for a
                # negligible apq use its first-order limit t = apq / diff.
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff
                else:
                    tau = diff / (2.0 * apq)
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    else:
        raise RuntimeError("Jacobi iteration did not converge")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
