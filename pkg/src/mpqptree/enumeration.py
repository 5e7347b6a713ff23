"""Offline mpQP solver: optimal active-set enumeration.

The search walks the active-set lattice breadth-first from the empty
set.  A candidate set A is accepted when its constraint rows pass LICQ
(the SPD factorization of G_A H^-1 G_A' succeeds) and its critical
region is full-dimensional; children of an expandable set are all
one-constraint additions and removals.  A candidate is expandable when
the joint primal-feasibility set

    FEAS(A) = {(z, p) | G_A z = b_A + S_A p, G z <= b + S p, p in theta}

is nonempty: FEAS shrinks monotonically as constraints are added, so
every subset of an optimal active set is expandable and pure-addition
chains from the empty set reach every region, including those whose
intermediate sets are optimal nowhere (negative multipliers) or have
empty critical regions.  Constraints whose multiplier is identically
zero over the region are moved out of the active set before
canonicalization so that weakly-active duplicates collapse onto one
region.

Regions are numbered by sorting the accepted active sets by cardinality
and then lexicographically, which makes the output independent of
evaluation order (and of the number of worker threads).
"""

from collections import deque
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import lp, numerics, qp
from .errors import BudgetExceeded
from .problem import ExplicitSolution, RegionSolution, canonical_active_set

LICQ_FAIL = "licq"
EMPTY_REGION = "empty"
LOWER_DIMENSIONAL = "lower_dimensional"

# A multiplier row with |q| + max|Q| below this is identically zero.
WEAK_TOL = 1e-9


class Rejected:
    def __init__(self, reason, detail=""):
        self.reason = reason
        self.detail = detail

    def __repr__(self):
        return f"Rejected({self.reason})"


class CriticalRegion:
    """Minimal H-description of one region plus bookkeeping for its rows."""

    def __init__(self, polyhedron, row_kind, row_constraint, center, radius):
        self.polyhedron = polyhedron      # minimal rows only
        self.row_kind = row_kind          # per kept row: 'primal'|'dual'|'theta'
        self.row_constraint = row_constraint
        self.center = center
        self.radius = radius


def solve_for_active_set(problem, active):
    """Affine laws (k, K, q, Q) for one active set, or Rejected on LICQ loss."""
    active = canonical_active_set(active, problem.nc)
    np_ = problem.np_
    if not active:
        return RegionSolution((), np.zeros(problem.nz), np.zeros((problem.nz, np_)),
                              np.zeros(0), np.zeros((0, np_)))
    idx = list(active)
    try:
        F = numerics.cholesky(problem.G_hinv_GT()[np.ix_(idx, idx)])
    except numerics.NotPositiveDefinite:
        return Rejected(LICQ_FAIL, f"active set {active}")
    rhs = np.column_stack([problem.b[idx], problem.S[idx]])
    sol = -numerics.spd_solve(F, rhs)
    q, Q = sol[:, 0], sol[:, 1:]
    kK = -problem.hinv_GT()[:, idx] @ sol
    return RegionSolution(active, kK[:, 0], kK[:, 1:], q, Q)


def critical_region_rows(problem, rs):
    """All rows of the region polyhedron before redundancy removal.

    Primal rows (inactive constraints, ascending), then dual rows
    (active constraints, ascending), then the parameter-domain rows.
    Row values are normalized to 'satisfied iff <= 0' form and returned
    as (A, b) with A p <= b.
    """
    nc = problem.nc
    inactive = [n for n in range(nc) if n not in set(rs.active_set)]
    A_rows, b_rows, kinds, cons = [], [], [], []
    if inactive:
        Gn = problem.G[inactive]
        A_rows.append(Gn @ rs.K - problem.S[inactive])
        b_rows.append(problem.b[inactive] - Gn @ rs.k)
        kinds += ["primal"] * len(inactive)
        cons += inactive
    if rs.active_set:
        A_rows.append(-rs.Q)
        b_rows.append(rs.q)
        kinds += ["dual"] * len(rs.active_set)
        cons += list(rs.active_set)
    A_rows.append(problem.theta.A)
    b_rows.append(problem.theta.b)
    kinds += ["theta"] * problem.theta.A.shape[0]
    cons += [-1] * problem.theta.A.shape[0]
    return np.vstack(A_rows), np.concatenate(b_rows), kinds, cons


def build_critical_region(problem, rs):
    """Minimal region description and defining-hyperplane index sets.

    Returns (CriticalRegion, e_primal, e_dual) or Rejected when the
    region is empty or lower-dimensional.
    """
    A, b, kinds, cons = critical_region_rows(problem, rs)
    poly = lp.Polyhedron(A, b)
    center, radius = lp.chebyshev_center(poly)
    if radius < lp.EMPTY_TOL:
        if center is None or radius < -lp.EMPTY_TOL:
            return Rejected(EMPTY_REGION, f"radius {radius:.3e}")
        return Rejected(LOWER_DIMENSIONAL, f"radius {radius:.3e}")
    kept = lp.minimal_rows(poly)
    e_primal = tuple(sorted(cons[i] for i in kept if kinds[i] == "primal"))
    e_dual = tuple(sorted(cons[i] for i in kept if kinds[i] == "dual"))
    region = CriticalRegion(
        lp.Polyhedron(A[list(kept)], b[list(kept)]),
        [kinds[i] for i in kept], [cons[i] for i in kept], center, radius)
    return region, e_primal, e_dual


def region_polyhedron(problem, rs):
    """Region polyhedron assembled from the stored defining hyperplanes."""
    nc = problem.nc
    rows_A, rows_b = [], []
    if rs.e_primal:
        idx = list(rs.e_primal)
        Gn = problem.G[idx]
        rows_A.append(Gn @ rs.K - problem.S[idx])
        rows_b.append(problem.b[idx] - Gn @ rs.k)
    if rs.e_dual:
        pos = [rs.active_set.index(n) for n in rs.e_dual]
        rows_A.append(-rs.Q[pos])
        rows_b.append(rs.q[pos])
    rows_A.append(problem.theta.A)
    rows_b.append(problem.theta.b)
    return lp.Polyhedron(np.vstack(rows_A), np.concatenate(rows_b))


def _weak_rows(rs):
    if not rs.active_set:
        return ()
    mags = np.abs(rs.q) + np.max(np.abs(rs.Q), axis=1, initial=0.0)
    return tuple(rs.active_set[i] for i in np.flatnonzero(mags < WEAK_TOL))


def _joint_feasible(problem, active):
    """Nonemptiness of FEAS(active); see the module docstring."""
    nz = problem.nz
    mt = problem.theta.A.shape[0]
    act = list(active)
    Geq = np.hstack([problem.G[act], -problem.S[act]])
    rows = [np.hstack([problem.G, -problem.S]),
            np.hstack([np.zeros((mt, nz)), problem.theta.A])]
    rhs = [problem.b, problem.theta.b]
    if act:
        rows += [Geq, -Geq]
        rhs += [problem.b[act], -problem.b[act]]
    poly = lp.Polyhedron(np.vstack(rows), np.concatenate(rhs))
    out = lp.lp_solve(np.zeros(nz + problem.np_), poly)
    return out.status == lp.OPTIMAL


def _evaluate(problem, cand):
    """Full candidate evaluation; returns (canonical_set, result, expandable).

    `result` is a Rejected, or (RegionSolution-with-e-sets, CriticalRegion).
    The canonical set differs from `cand` when weakly active rows were
    dropped.  `expandable` says whether children of the candidate may
    still contain optimal active sets.
    """
    rs = solve_for_active_set(problem, cand)
    if isinstance(rs, Rejected):
        return cand, rs, False
    weak = _weak_rows(rs)
    canon = cand
    if weak:
        canon = tuple(n for n in cand if n not in set(weak))
        rs = solve_for_active_set(problem, canon)
        if isinstance(rs, Rejected):
            return canon, rs, False
    built = build_critical_region(problem, rs)
    if isinstance(built, Rejected):
        return canon, built, _joint_feasible(problem, canon)
    region, e_primal, e_dual = built
    return canon, (rs.with_hyperplanes(e_primal, e_dual), region), True


def enumerate_regions(problem, budget=1_000_000, threads=1):
    """Enumerate all full-dimensional critical regions.

    Returns (ExplicitSolution, dict active_set -> CriticalRegion).
    Raises BudgetExceeded when more than `budget` candidates get
    evaluated, which marks the instance as beyond desk scale.
    """
    visited = set()
    accepted = {}
    region_geo = {}
    evaluated = 0
    frontier = deque([()])
    visited.add(())

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while frontier:
            wave = sorted(frontier, key=lambda a: (len(a), a))
            frontier.clear()
            evaluated += len(wave)
            if evaluated > budget:
                raise BudgetExceeded(f"evaluated {evaluated} candidates (budget {budget})")
            if pool is not None:
                results = list(pool.map(lambda c: _evaluate(problem, c), wave))
            else:
                results = [_evaluate(problem, c) for c in wave]
            for cand, (canon, res, expandable) in zip(wave, results):
                if canon != cand:
                    if canon in visited:
                        continue
                    visited.add(canon)
                if not isinstance(res, Rejected) and canon not in accepted:
                    rs, region = res
                    accepted[canon] = rs
                    region_geo[canon] = region
                if not expandable:
                    continue
                for j in range(problem.nc):
                    child = (tuple(sorted(canon + (j,)))
                             if j not in set(canon)
                             else tuple(n for n in canon if n != j))
                    if len(child) > min(problem.nz, problem.nc):
                        continue
                    if child not in visited:
                        visited.add(child)
                        frontier.append(child)
    finally:
        if pool is not None:
            pool.shutdown()

    order = sorted(accepted, key=lambda a: (len(a), a))
    regions = [accepted[a] for a in order]
    sol = ExplicitSolution(problem, regions)
    geo = {a: region_geo[a] for a in order}
    return sol, geo


def remove_redundant_constraints(problem):
    """Drop constraint rows that are redundant over the joint (z, p) set.

    The joint polyhedron is {(z, p) | G z - S p <= b, p in theta}; only
    constraint rows are tested and dropped, the domain rows always stay.
    Returns (reduced problem, kept row indices).
    """
    nz, nc = problem.nz, problem.nc
    mt = problem.theta.A.shape[0]
    A = np.vstack([
        np.hstack([problem.G, -problem.S]),
        np.hstack([np.zeros((mt, nz)), problem.theta.A]),
    ])
    b = np.concatenate([problem.b, problem.theta.b])

    # Exact duplicates among constraint rows: keep the lowest index.
    norms = np.linalg.norm(A[:nc], axis=1)
    alive = []
    for i in range(nc):
        if norms[i] <= lp.DUP_TOL:
            if b[i] >= -lp.FEAS_TOL:
                continue
            raise ValueError(f"constraint row {i} is structurally infeasible")
        alive.append(i)
    if alive:
        dup = lp._duplicate_mask(A[alive], b[alive])
        alive = [i for i, d in zip(alive, dup) if not d]

    kept = list(alive)
    pos = 0
    while pos < len(kept):
        i = kept[pos]
        rows = kept[:pos] + kept[pos + 1:] + list(range(nc, nc + mt))
        sub = lp.Polyhedron(A[rows], b[rows])
        out = lp.lp_solve(-A[i], sub)
        redundant = (out.status == lp.OPTIMAL and -out.objective <= b[i] + lp.FEAS_TOL) \
            or out.status == lp.INFEASIBLE
        if redundant:
            kept.pop(pos)
        else:
            pos += 1

    from .problem import MpQpProblem
    reduced = MpQpProblem(problem.H, problem.G[kept], problem.b[kept],
                          problem.S[kept], problem.theta,
                          back_shift=problem.back_shift,
                          manifest={**problem.manifest, "kept_rows": [i + 1 for i in kept]})
    return reduced, tuple(kept)


def recover_active_set(problem, p):
    """Active set at p recovered from the ground-truth QP (multiplier rule)."""
    return qp.recover_active_set(problem, p)
