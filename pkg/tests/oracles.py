"""Independent brute-force oracles used to freeze expected test values.

Nothing in here may call into the code paths under test: LPs are checked
by vertex enumeration, QPs by exhaustive active-set enumeration solved
with plain numpy, and critical regions by direct polyhedral algebra.
"""

import itertools

import numpy as np


def enumerate_vertices(A, b, tol=1e-9):
    """All vertices of {x | A x <= b} by enumerating d-subsets of rows.

    Only practical for small m and d; intended as an LP ground truth.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, d = A.shape
    verts = []
    for rows in itertools.combinations(range(m), d):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if np.all(A @ x <= b + tol):
            if not any(np.linalg.norm(x - v) < 1e-9 for v in verts):
                verts.append(x)
    return verts


def lp_min_by_vertices(c, A, b):
    """Minimum of c'x over a bounded polyhedron via vertex enumeration."""
    verts = enumerate_vertices(A, b)
    if not verts:
        return None, None
    vals = [float(np.dot(c, v)) for v in verts]
    i = int(np.argmin(vals))
    return vals[i], verts[i]


def redundant_by_vertices(A, b, row, tol=1e-8, box=1e3):
    """Redundancy of one row decided on the vertices of the remaining rows.

    The remainder is intersected with a large box so the maximum is
    attained at a vertex even when the remainder is unbounded; `box`
    must dwarf the scale of the data for the answer to be exact.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    d = A.shape[1]
    keep = [i for i in range(A.shape[0]) if i != row]
    A_rest = np.vstack([A[keep], np.eye(d), -np.eye(d)])
    b_rest = np.concatenate([b[keep], np.full(2 * d, box)])
    verts = enumerate_vertices(A_rest, b_rest)
    if not verts:
        return True
    worst = max(float(A[row] @ v) for v in verts)
    return worst <= b[row] + tol


def solve_qp_brute(H, G, b, tol=1e-8):
    """Exhaustive active-set solve of min 1/2 z'Hz s.t. G z <= b.

    Tries every linearly independent subset of constraints as the active
    set, solves the equality-constrained problem, and returns the unique
    KKT point.  Returns (z, lam) or (None, None) when infeasible.
    """
    H = np.asarray(H, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    nz = H.shape[0]
    nc = G.shape[0]
    Hinv = np.linalg.inv(H)
    best = None
    for size in range(0, nz + 1):
        for subset in itertools.combinations(range(nc), size):
            Ga = G[list(subset)]
            M = Ga @ Hinv @ Ga.T
            if size and np.linalg.matrix_rank(Ga, tol=1e-10) < size:
                continue
            if size:
                try:
                    lam_a = -np.linalg.solve(M, b[list(subset)])
                except np.linalg.LinAlgError:
                    continue
                z = -Hinv @ Ga.T @ lam_a
            else:
                lam_a = np.zeros(0)
                z = np.zeros(nz)
            if np.any(lam_a < -tol):
                continue
            if np.any(G @ z > b + tol):
                continue
            lam = np.zeros(nc)
            lam[list(subset)] = lam_a
            obj = 0.5 * z @ H @ z
            if best is None or obj < best[2] - 1e-12:
                best = (z, lam, obj)
    if best is None:
        return None, None
    return best[0], best[1]


def qp_objective(H, z):
    return 0.5 * float(z @ H @ z)


def random_spd(rng, n, shift=1.0):
    B = rng.standard_normal((n, n))
    return B.T @ B + shift * np.eye(n)
