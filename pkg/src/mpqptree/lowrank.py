"""Rank-one updates between parametric solutions of neighboring active sets.

Adding a constraint j to an active set A changes the parametric solution
by a rank-one correction

    z_new(p) = z_old(p) + f (c + v'p),
    lam_new(p) = lam_old(p) - d~ (c + v'p),

where the scalars come from the bordered Schur complement of
G_A H^-1 G_A' with the new row j appended last:

    C = w0 - w' W^-1 w,
    c = (w' W^-1 b_A - b_j) / C,
    v = (S_A' W^-1 w - S_j') / C,
    d~ on A = W^-1 w,  d~ at j = -1,  d~ elsewhere = 0,
    f = H^-1 G_{A+j}' d~_{A+j}.

Removing a constraint is the same payload with f and d~ negated (c, v
unchanged).  The hyperplane image f~ = G f vanishes identically on the
smaller of the two active sets; those entries are asserted tiny and then
stored as exact zeros so that downstream memory accounting is
deterministic.
"""

import numpy as np

from . import numerics
from .errors import LicqViolation, SchurNotPositive
from .problem import RegionSolution

ADD = "add"
REMOVE = "remove"

# f~ must vanish on the smaller active set; larger residuals are a bug.
STRUCTURAL_ZERO_TOL = 1e-10


class LowRankUpdate:
    """One edge payload: scalars (c, v), primal direction f, sparse rows.

    d_entries maps constraint index -> d~ value (support: the larger
    active set of the edge); f_entries maps constraint index -> f~ value
    and never has keys in the smaller active set (structural zeros).
    `zero_primal` records the structural-zero index set for pruning.
    """

    def __init__(self, edge_kind, constraint, c, v, f, d_entries, f_entries,
                 zero_primal):
        self.edge_kind = edge_kind
        self.constraint = int(constraint)
        self.c = float(c)
        self.v = np.asarray(v, dtype=float).reshape(-1)
        self.f = np.asarray(f, dtype=float).reshape(-1)
        self.d_entries = dict(d_entries)
        self.f_entries = dict(f_entries)
        self.zero_primal = frozenset(zero_primal)

    def scalar(self, p):
        return self.c + float(self.v @ p)

    def pruned(self, store_primal, store_dual):
        """Payload restricted to the stored hyperplane index sets."""
        f_entries = {n: self.f_entries[n] for n in store_primal
                     if n in self.f_entries}
        d_entries = {n: self.d_entries[n] for n in store_dual
                     if n in self.d_entries}
        return LowRankUpdate(self.edge_kind, self.constraint, self.c, self.v,
                             self.f, d_entries, f_entries, self.zero_primal)


def _base_payload(problem, base, j):
    """Payload pieces for the edge between `base` and `base + {j}`.

    `base` is the smaller active set (a sorted tuple without j).  Raises
    LicqViolation when the bordered matrix is not positive definite.
    """
    GHiGT = problem.G_hinv_GT()
    idx = list(base)
    try:
        F_W = numerics.cholesky(GHiGT[np.ix_(idx, idx)])
        part = numerics.border_partition(F_W, GHiGT[idx, j], GHiGT[j, j])
    except (numerics.NotPositiveDefinite, SchurNotPositive) as exc:
        raise LicqViolation(f"edge {base} +{j}: {exc}") from exc
    C = part.C
    if idx:
        Wi_w = numerics.spd_solve(F_W, part.w)
        c = (Wi_w @ problem.b[idx] - problem.b[j]) / C
        v = (problem.S[idx].T @ Wi_w - problem.S[j]) / C
        f = problem.hinv_GT()[:, idx] @ Wi_w - problem.hinv_GT()[:, j]
    else:
        Wi_w = np.zeros(0)
        c = -problem.b[j] / C
        v = -problem.S[j] / C
        f = -problem.hinv_GT()[:, j]

    d_entries = {n: float(Wi_w[i]) for i, n in enumerate(idx)}
    d_entries[j] = -1.0

    f_tilde = problem.G @ f
    resid = np.max(np.abs(f_tilde[idx])) if idx else 0.0
    if resid > STRUCTURAL_ZERO_TOL:
        raise LicqViolation(
            f"edge {base} +{j}: structural zeros of f~ violated ({resid:.3e})")
    f_tilde[idx] = 0.0
    f_entries = {n: float(f_tilde[n]) for n in range(problem.nc) if n not in set(idx)}
    return c, v, f, d_entries, f_entries


def _child_solution(problem, parent, update, child_set):
    """Child region laws from the parent laws plus one payload."""
    nc = problem.nc
    k = parent.k + update.f * update.c
    K = parent.K + np.outer(update.f, update.v)
    qt = parent.q_tilde(nc)
    Qt = parent.Q_tilde(nc)
    d_full = np.zeros(nc)
    for n, val in update.d_entries.items():
        d_full[n] = val
    qt = qt - d_full * update.c
    Qt = Qt - np.outer(d_full, update.v)
    rows = list(child_set)
    return RegionSolution(child_set, k, K, qt[rows], Qt[rows])


def add_constraint_update(problem, parent, j):
    """Payload and child solution for activating constraint j.

    Returns (LowRankUpdate, RegionSolution for parent.active_set + {j}).
    """
    if j in parent.active_set:
        raise ValueError(f"constraint {j} already active")
    base = parent.active_set
    c, v, f, d_entries, f_entries = _base_payload(problem, base, j)
    update = LowRankUpdate(ADD, j, c, v, f, d_entries, f_entries, zero_primal=base)
    child_set = tuple(sorted(base + (j,)))
    return update, _child_solution(problem, parent, update, child_set)


def remove_constraint_update(problem, parent, j):
    """Payload and child solution for deactivating constraint j.

    The payload is the add payload of (parent.active_set - {j}) -> parent
    with f and d~ negated; c and v are unchanged.
    """
    if j not in parent.active_set:
        raise ValueError(f"constraint {j} not active")
    base = tuple(n for n in parent.active_set if n != j)
    c, v, f, d_entries, f_entries = _base_payload(problem, base, j)
    update = LowRankUpdate(
        REMOVE, j, c, v, -f,
        {n: -val for n, val in d_entries.items()},
        {n: -val for n, val in f_entries.items()},
        zero_primal=base)
    return update, _child_solution(problem, parent, update, base)


def chain_updates(problem, parent, child_set, orders_cap=3):
    """Payload chain taking `parent` to the region with `child_set`.

    Single-step edges produce one payload.  Larger symmetric differences
    are realized as a chain of single-constraint payloads applied in
    constraint-index order; when an intermediate set fails LICQ, all
    permutations are tried for up to `orders_cap` steps.  Raises
    LicqViolation when no valid ordering exists.
    """
    from itertools import permutations

    parent_set = set(parent.active_set)
    child = set(child_set)
    moves = sorted(parent_set ^ child)
    if not moves:
        raise ValueError("parent and child active sets are identical")

    orders = [tuple(moves)]
    if len(moves) > 1 and len(moves) <= orders_cap:
        orders = list(permutations(moves))
    last_error = None
    for order in orders:
        try:
            chain = []
            current = parent
            for j in order:
                if j in child:
                    upd, current = add_constraint_update(problem, current, j)
                else:
                    upd, current = remove_constraint_update(problem, current, j)
                chain.append(upd)
            return chain, current
        except LicqViolation as exc:
            last_error = exc
    raise LicqViolation(f"no LICQ-valid chain {parent.active_set} -> {child_set}: "
                        f"{last_error}")


def hyperplane_payload(problem, update, store_primal, store_dual):
    """Prune a payload to the stored hyperplane index sets."""
    return update.pruned(store_primal, store_dual)
