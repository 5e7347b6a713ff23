"""Dense LP machinery for polyhedral computations.

A polyhedron is the set {x | A x <= b} with free variables.  The solver
is a two-phase tableau simplex using Bland's rule throughout (entering
column = lowest eligible index, leaving row = lowest basic index among
minimal ratios), which makes every outcome deterministic for a fixed
input.  That determinism matters: region counts and stored hyperplane
index sets downstream must be reproducible across runs.

Feasibility is judged at FEAS_TOL absolute; polyhedra whose Chebyshev
radius falls below EMPTY_TOL are treated as empty / lower-dimensional.
"""

import numpy as np

from .errors import EmptyPolyhedron

FEAS_TOL = 1e-8
EMPTY_TOL = 1e-9
# Pivot tolerances of the simplex itself.
_RCOST_TOL = 1e-9
_PIVOT_TOL = 1e-9
# Rows agreeing to this tolerance after unit-norm scaling are duplicates.
DUP_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class Polyhedron:
    """H-representation {x | A x <= b}."""

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError(f"A has {self.A.shape[0]} rows, b has {self.b.shape[0]}")
        if not (np.isfinite(self.A).all() and np.isfinite(self.b).all()):
            raise ValueError("polyhedron data must be finite")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def d(self):
        return self.A.shape[1]

    def contains(self, x, tol=FEAS_TOL):
        return bool(np.all(self.A @ x <= self.b + tol))

    def without_row(self, i):
        keep = np.arange(self.m) != i
        return Polyhedron(self.A[keep], self.b[keep])


class LpOutcome:
    def __init__(self, status, x=None, objective=None):
        self.status = status
        self.x = x
        self.objective = objective

    def __repr__(self):
        return f"LpOutcome({self.status}, obj={self.objective})"


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    basis[row] = col


def _simplex_phase(T, basis, cost, allowed):
    """Minimize cost over the tableau in place; returns 'optimal'/'unbounded'.

    `allowed` marks columns eligible to enter the basis.
    """
    m = T.shape[0]
    # Reduced costs w.r.t. the current basis.
    z = cost.astype(float).copy()
    for i in range(m):
        if z[basis[i]] != 0.0:
            z -= z[basis[i]] * T[i, :-1]
    while True:
        candidates = np.flatnonzero((z < -_RCOST_TOL) & allowed)
        if candidates.size == 0:
            return OPTIMAL
        col = int(candidates[0])  # Bland: lowest index
        pos = T[:, col] > _PIVOT_TOL
        if not pos.any():
            return UNBOUNDED
        rows = np.flatnonzero(pos)
        ratios = T[rows, -1] / T[rows, col]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12]
        row = int(tied[np.argmin(basis[tied])])  # Bland: lowest basic index
        zc = z[col]
        _pivot(T, basis, row, col)
        z -= zc * T[row, :-1]
        z[col] = 0.0


def lp_solve(c, poly):
    """Minimize c' x over a polyhedron with free variables.

    Returns an LpOutcome whose status is one of optimal / infeasible /
    unbounded; x and objective are filled only when optimal.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    A, b = poly.A, poly.b
    m, d = A.shape
    if c.shape[0] != d:
        raise ValueError(f"c has length {c.shape[0]}, polyhedron dimension is {d}")
    if m == 0:
        if np.all(np.abs(c) <= _RCOST_TOL):
            return LpOutcome(OPTIMAL, np.zeros(d), 0.0)
        return LpOutcome(UNBOUNDED)

    # Equilibrate rows: scaling a row never changes the feasible set but
    # keeps the absolute pivot tolerances meaningful on wildly scaled data.
    scale = np.max(np.abs(A), axis=1)
    scale[scale <= 0] = 1.0
    A = A / scale[:, None]
    b = b / scale

    # Standard form: x = xp - xn, slacks s, artificials on negative-rhs rows.
    neg = b < 0
    sgn = np.where(neg, -1.0, 1.0)
    n_art = int(neg.sum())
    ncols = 2 * d + m + n_art
    T = np.zeros((m, ncols + 1))
    T[:, :d] = A * sgn[:, None]
    T[:, d:2 * d] = -A * sgn[:, None]
    T[:, 2 * d:2 * d + m] = np.diag(sgn)
    T[:, -1] = b * sgn
    basis = np.empty(m, dtype=int)
    art_cols = []
    k = 0
    for i in range(m):
        if neg[i]:
            col = 2 * d + m + k
            T[i, col] = 1.0
            basis[i] = col
            art_cols.append(col)
            k += 1
        else:
            basis[i] = 2 * d + i

    allowed = np.ones(ncols, dtype=bool)
    if n_art:
        cost1 = np.zeros(ncols)
        cost1[art_cols] = 1.0
        _simplex_phase(T, basis, cost1, allowed)
        resid = sum(T[i, -1] for i in range(m) if basis[i] in set(art_cols))
        if resid > FEAS_TOL:
            return LpOutcome(INFEASIBLE)
        # Pivot any leftover artificials out of the basis when possible.
        art_set = set(art_cols)
        for i in range(m):
            if basis[i] in art_set:
                nz = np.flatnonzero(np.abs(T[i, :2 * d + m]) > _PIVOT_TOL)
                if nz.size:
                    _pivot(T, basis, i, int(nz[0]))
        allowed[art_cols] = False

    cost2 = np.zeros(ncols)
    cost2[:d] = c
    cost2[d:2 * d] = -c
    status = _simplex_phase(T, basis, cost2, allowed)
    if status == UNBOUNDED:
        return LpOutcome(UNBOUNDED)
    x = np.zeros(d)
    for i in range(m):
        if basis[i] < d:
            x[basis[i]] += T[i, -1]
        elif basis[i] < 2 * d:
            x[basis[i] - d] -= T[i, -1]
    return LpOutcome(OPTIMAL, x, float(c @ x))


def chebyshev_center(poly):
    """Center and radius of the largest inscribed ball.

    The radius variable is free, so the underlying LP is always feasible:
    a negative radius means the polyhedron is empty, a radius below
    EMPTY_TOL means it is empty or lower-dimensional.  Returns
    (center, radius); center is None when the polyhedron is empty and
    radius is +inf when the ball can grow without bound.
    """
    A, b = poly.A, poly.b
    norms = np.linalg.norm(A, axis=1)
    zero = norms <= DUP_TOL
    if np.any(zero & (b < -FEAS_TOL)):
        return None, -np.inf
    keep = ~zero
    A, b, norms = A[keep], b[keep], norms[keep]
    if A.shape[0] == 0:
        return np.zeros(poly.d), np.inf
    ball = Polyhedron(np.column_stack([A, norms]), b)
    cost = np.zeros(poly.d + 1)
    cost[-1] = -1.0
    out = lp_solve(cost, ball)
    if out.status == UNBOUNDED:
        return np.zeros(poly.d), np.inf
    center = out.x[:-1]
    radius = float(out.x[-1])
    if radius < 0:
        return None, radius
    return center, radius


def is_redundant(poly, row):
    """True iff dropping `row` cannot enlarge the polyhedron.

    Decided by maximizing the row's left-hand side over the remaining
    rows; an unbounded maximum means the row is essential.  For an empty
    remainder the row is vacuously redundant.
    """
    a = poly.A[row]
    rest = poly.without_row(row)
    if np.linalg.norm(a) <= DUP_TOL:
        return poly.b[row] >= -FEAS_TOL
    out = lp_solve(-a, rest)
    if out.status == UNBOUNDED:
        return False
    if out.status == INFEASIBLE:
        return True
    return -out.objective <= poly.b[row] + FEAS_TOL


def _duplicate_mask(A, b):
    """Mark rows that repeat an earlier row after unit-norm scaling."""
    m = A.shape[0]
    norms = np.linalg.norm(A, axis=1)
    scaled_A = A / norms[:, None]
    scaled_b = b / norms
    dup = np.zeros(m, dtype=bool)
    for i in range(m):
        if dup[i]:
            continue
        for j in range(i + 1, m):
            if dup[j]:
                continue
            if (abs(scaled_b[i] - scaled_b[j]) <= DUP_TOL
                    and np.max(np.abs(scaled_A[i] - scaled_A[j])) <= DUP_TOL):
                dup[j] = True
    return dup


def minimal_rows(poly):
    """Indices of an irredundant subset of rows describing the same set.

    Exact (unit-norm) duplicates are removed first, keeping the lowest
    index; the rest is classical one-LP-per-row reduction.  Raises
    EmptyPolyhedron when the Chebyshev radius is below EMPTY_TOL.
    """
    _, radius = chebyshev_center(poly)
    if radius < EMPTY_TOL:
        raise EmptyPolyhedron(f"Chebyshev radius {radius:.3e}")

    norms = np.linalg.norm(poly.A, axis=1)
    idx = [i for i in range(poly.m) if norms[i] > DUP_TOL]
    # Trivially-true zero rows (0' x <= b, b >= 0) never survive.
    if idx:
        sub = [i for i in idx]
        dup = _duplicate_mask(poly.A[sub], poly.b[sub])
        idx = [i for i, d in zip(sub, dup) if not d]

    kept = list(idx)
    pos = 0
    while pos < len(kept):
        i = kept[pos]
        trial = kept[:pos] + kept[pos + 1:]
        sub = Polyhedron(poly.A[trial], poly.b[trial])
        out = lp_solve(-poly.A[i], sub)
        redundant = False
        if out.status == OPTIMAL:
            redundant = -out.objective <= poly.b[i] + FEAS_TOL
        elif out.status == INFEASIBLE:
            redundant = True
        if redundant:
            kept.pop(pos)
        else:
            pos += 1
    return tuple(kept)
