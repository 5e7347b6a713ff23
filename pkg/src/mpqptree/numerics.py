"""Small dense linear-algebra kernels.

Everything here operates on plain float64 ndarrays and is sized for
desk-scale problems (a few hundred rows at most), so the factorizations
are dense and unpivoted.  The bordered-inverse helper implements the
blockwise inverse of an SPD matrix

    [ W   w  ]
    [ w'  w0 ]

through its Schur complement ``C = w0 - w' W^-1 w``; a non-positive C is
how linear dependence of a newly appended row shows up.
"""

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, SchurNotPositive

# Relative pivot tolerance: a pivot below PIVOT_RTOL * max(diag) fails.
PIVOT_RTOL = 1e-10
# Relative Schur tolerance: C <= SCHUR_RTOL * w0 counts as degenerate.
SCHUR_RTOL = 1e-12


class CholeskyFactor:
    """Lower-triangular factor L with L L' equal to the factored matrix."""

    def __init__(self, L):
        self.L = np.asarray(L, dtype=float)
        self.n = self.L.shape[0]

    def __repr__(self):
        return f"CholeskyFactor(n={self.n})"


class BlockSpdPartition:
    """Pieces of the bordered SPD inverse: W factor, border w, corner w0, Schur C."""

    def __init__(self, W_factor, w, w0, C):
        self.W_factor = W_factor
        self.w = np.asarray(w, dtype=float)
        self.w0 = float(w0)
        self.C = float(C)


def cholesky(M):
    """Unpivoted dense Cholesky of a symmetric matrix.

    Raises NotPositiveDefinite (with the failing pivot index) when a pivot
    drops below PIVOT_RTOL times the largest diagonal entry.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise DimensionMismatch(f"expected square matrix, got {M.shape}")
    if n == 0:
        return CholeskyFactor(np.zeros((0, 0)))
    tol = PIVOT_RTOL * max(np.max(np.abs(np.diag(M))), 1e-300)
    L = np.zeros((n, n))
    for k in range(n):
        pivot = M[k, k] - L[k, :k] @ L[k, :k]
        if pivot <= tol:
            raise NotPositiveDefinite(k)
        L[k, k] = np.sqrt(pivot)
        if k + 1 < n:
            L[k + 1:, k] = (M[k + 1:, k] - L[k + 1:, :k] @ L[k, :k]) / L[k, k]
    return CholeskyFactor(L)


def _forward_sub(L, b):
    # Solve L x = b, L lower triangular; b is (n,) or (n, k).
    x = np.array(b, dtype=float, copy=True)
    for i in range(L.shape[0]):
        x[i] = (b[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def _backward_sub(L, b):
    # Solve L' x = b.
    n = L.shape[0]
    x = np.array(b, dtype=float, copy=True)
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def spd_solve(F, rhs):
    """Solve M x = rhs given F = cholesky(M); rhs may be a vector or matrix."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != F.n:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, factor is {F.n}x{F.n}")
    if F.n == 0:
        return rhs.copy()
    return _backward_sub(F.L, _forward_sub(F.L, rhs))


def border_partition(F_W, w, w0):
    """Schur-complement pieces for appending one border row/column to W.

    Parameters
    ----------
    F_W : CholeskyFactor
        Factor of the existing SPD block W (may be 0x0).
    w : ndarray
        Border column, length matching W.
    w0 : float
        Corner scalar.

    Raises SchurNotPositive when C = w0 - w' W^-1 w <= SCHUR_RTOL * w0,
    i.e. the bordered matrix is not (numerically) positive definite.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != F_W.n:
        raise DimensionMismatch(f"border has length {w.shape[0]}, W is {F_W.n}x{F_W.n}")
    w0 = float(w0)
    if F_W.n == 0:
        C = w0
    else:
        C = w0 - float(w @ spd_solve(F_W, w))
    if C <= SCHUR_RTOL * abs(w0):
        raise SchurNotPositive(f"Schur complement {C:.3e} with corner {w0:.3e}")
    return BlockSpdPartition(F_W, w, w0, C)


def assemble_bordered_inverse(part):
    """Dense inverse of the bordered matrix from its partition (test/debug aid)."""
    n = part.W_factor.n
    inv = np.zeros((n + 1, n + 1))
    if n:
        Wi_w = spd_solve(part.W_factor, part.w)
        Wi = spd_solve(part.W_factor, np.eye(n))
        inv[:n, :n] = Wi + np.outer(Wi_w, Wi_w) / part.C
        inv[:n, n] = -Wi_w / part.C
        inv[n, :n] = -Wi_w / part.C
    inv[n, n] = 1.0 / part.C
    return inv
