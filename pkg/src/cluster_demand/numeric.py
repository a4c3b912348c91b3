"""Shared numerical kernels: covariance, symmetric eigensolver, distances.

The eigensolver is a cyclic Jacobi iteration.  The matrices this package
decomposes are small (daily profiles have at most 24 slots, affinity
Laplacians one row per household), so a simple, fully deterministic solver
is preferred over a faster one: identical input bytes give identical
eigenvector bytes on every run, which the downstream reducers and the
validation strategy rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError

#: Stop a Jacobi run once the off-diagonal Frobenius norm falls below this
#: fraction of the input's Frobenius norm.
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    ``eigenvalues`` are sorted descending; column ``i`` of ``eigenvectors``
    belongs to ``eigenvalues[i]``.  ``sweep_off_norms`` records the
    off-diagonal Frobenius norm before each Jacobi sweep (a convergence
    diagnostic; it decreases monotonically).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweep_off_norms: tuple[float, ...]


def covariance(X) -> np.ndarray:
    """Column-mean-centered covariance of ``X`` (rows = samples), 1/(n-1) normalized.

    The result is symmetrized after accumulation so it is exactly symmetric.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError(f"expected a 2-D sample matrix, got shape {X.shape}")
    n = X.shape[0]
    if n < 2:
        raise InputError(f"covariance needs at least 2 samples, got {n}")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    return (cov + cov.T) / 2.0


def _offdiag_norm(A: np.ndarray) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.sqrt((off * off).sum()))


def sym_eigen(S, max_sweeps: int = JACOBI_MAX_SWEEPS, tol: float = JACOBI_TOL) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues come back sorted descending with orthonormal eigenvector
    columns.  Signs are fixed so that the largest-magnitude component of
    each eigenvector is positive (first such component on magnitude ties),
    which makes projections reproducible across runs and platforms.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InputError(f"expected a square matrix, got shape {S.shape}")
    d = S.shape[0]
    scale = max(1.0, float(np.abs(S).max()) if d else 1.0)
    if d and float(np.abs(S - S.T).max()) > 1e-12 * scale:
        raise InputError("matrix is not symmetric to 1e-12")

    A = S.copy()
    V = np.eye(d)
    frob = float(np.sqrt((S * S).sum()))
    threshold = tol * frob
    sweep_off: list[float] = []
    converged = frob == 0.0 or d < 2
    if not converged:
        for _ in range(max_sweeps):
            off = _offdiag_norm(A)
            sweep_off.append(off)
            if off <= threshold:
                converged = True
                break
            for p in range(d - 1):
                for q in range(p + 1, d):
                    apq = A[p, q]
                    if apq == 0.0:
                        continue
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    if abs(theta) > 1e150:  # asymptotic root, avoids theta**2 overflow
                        t = 1.0 / (2.0 * theta)
                    else:
                        t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    # A <- J^T A J for the (p, q) plane rotation J
                    col_p, col_q = A[:, p].copy(), A[:, q].copy()
                    A[:, p] = c * col_p - s * col_q
                    A[:, q] = s * col_p + c * col_q
                    row_p, row_q = A[p, :].copy(), A[q, :].copy()
                    A[p, :] = c * row_p - s * row_q
                    A[q, :] = s * row_p + c * row_q
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
                    V[:, p] = c * vec_p - s * vec_q
                    V[:, q] = s * vec_p + c * vec_q
        else:
            converged = _offdiag_norm(A) <= threshold
    if not converged:
        raise NumericalError(
            f"Jacobi did not converge in {max_sweeps} sweeps; "
            f"off-diagonal residual {_offdiag_norm(A):.3e} (threshold {threshold:.3e})"
        )

    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = V[:, order]
    for j in range(d):
        col = vectors[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            vectors[:, j] = -col
    return EigenDecomposition(values, vectors, tuple(sweep_off))


def euclidean(a, b) -> float:
    """Euclidean distance sqrt(sum((a_i - b_i)^2)) between equal-length vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.sum(diff * diff)))
