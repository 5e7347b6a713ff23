"""Ground-truth dense QP solver.

Solves min 1/2 z'Hz s.t. G z <= b + S p at a fixed parameter p with a
primal active-set method: start from the unconstrained minimum, run an
LP feasibility phase if needed, then add blocking constraints / drop
negative-multiplier constraints until the KKT conditions hold.  Pivoting
is deterministic (minimum step ratio, then lowest constraint index; most
negative multiplier, then lowest index).

This module exists to validate everything else and deliberately shares
no code with the enumeration or compression paths beyond the basic
Cholesky kernels.
"""

import numpy as np

from . import lp, numerics
from .errors import IterationCap, MpqpError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"

# Multiplier threshold for calling a constraint strictly active.
ACTIVE_TOL = 1e-9
_STEP_TOL = 1e-12
_DIR_TOL = 1e-11


class QpResult:
    def __init__(self, status, z=None, lam=None, active=()):
        self.status = status
        self.z = z
        self.lam = lam
        self.active = tuple(active)

    def __repr__(self):
        return f"QpResult({self.status}, active={self.active})"


def _phase1(problem, rhs):
    """Feasible point via min t s.t. G z - t <= rhs, t >= 0; None if infeasible."""
    nz = problem.nz
    A = np.hstack([problem.G, -np.ones((problem.nc, 1))])
    A = np.vstack([A, np.concatenate([np.zeros(nz), [-1.0]])])
    b = np.concatenate([rhs, [0.0]])
    c = np.zeros(nz + 1)
    c[-1] = 1.0
    out = lp.lp_solve(c, lp.Polyhedron(A, b))
    if out.status != lp.OPTIMAL or out.objective > 1e-9:
        return None
    return out.x[:nz]


def _check_kkt(problem, p, z, lam, rhs):
    stat = np.max(np.abs(problem.H @ z + problem.G.T @ lam))
    resid = problem.G @ z - rhs
    if stat > 1e-8:
        raise MpqpError(f"QP stationarity residual {stat:.3e}")
    if np.max(resid) > 1e-7:
        raise MpqpError(f"QP primal infeasibility {np.max(resid):.3e}")
    if np.min(lam) < -ACTIVE_TOL:
        raise MpqpError(f"QP negative multiplier {np.min(lam):.3e}")
    comp = np.max(np.abs(lam * resid))
    if comp > 1e-7:
        raise MpqpError(f"QP complementary slackness {comp:.3e}")


def solve_qp(problem, p):
    """Solve the QP at parameter p; returns a QpResult.

    Raises IterationCap after 1000 * nc iterations, which callers treat
    as a hard failure rather than an approximate answer.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    rhs = problem.b + problem.S @ p
    nz, nc = problem.nz, problem.nc
    GHiGT = problem.G_hinv_GT()
    HiGT = problem.hinv_GT()

    z = np.zeros(nz)
    if np.any(problem.G @ z > rhs + lp.FEAS_TOL):
        z = _phase1(problem, rhs)
        if z is None:
            return QpResult(INFEASIBLE)

    working = []
    cap = 1000 * max(nc, 1)
    for _ in range(cap):
        if working:
            idx = list(working)
            try:
                F = numerics.cholesky(GHiGT[np.ix_(idx, idx)])
            except numerics.NotPositiveDefinite:
                # Degenerate working set; drop its newest member.
                working.pop()
                continue
            lam_w = -numerics.spd_solve(F, rhs[idx])
            z_eq = -HiGT[:, idx] @ lam_w
        else:
            lam_w = np.zeros(0)
            z_eq = np.zeros(nz)

        d = z_eq - z
        if np.max(np.abs(d), initial=0.0) <= _DIR_TOL * (1.0 + np.max(np.abs(z_eq), initial=0.0)):
            if lam_w.size == 0 or np.min(lam_w) >= -ACTIVE_TOL:
                lam = np.zeros(nc)
                if working:
                    lam[list(working)] = np.maximum(lam_w, 0.0)
                _check_kkt(problem, p, z_eq, lam, rhs)
                active = tuple(sorted(k for k in range(nc) if lam[k] > ACTIVE_TOL))
                return QpResult(OPTIMAL, z_eq, lam, active)
            worst = np.min(lam_w)
            drops = [working[i] for i in range(len(working))
                     if lam_w[i] <= worst + 1e-12]
            working.remove(min(drops))
            continue

        # Largest feasible step toward the equality solution.
        alpha = 1.0
        blocker = -1
        for k in range(nc):
            if k in working:
                continue
            gd = problem.G[k] @ d
            if gd <= _STEP_TOL:
                continue
            ratio = max((rhs[k] - problem.G[k] @ z) / gd, 0.0)
            if ratio < alpha - 1e-12:
                alpha = ratio
                blocker = k
        z = z + alpha * d
        if blocker >= 0:
            working.append(blocker)
            working.sort()
    raise IterationCap(f"QP did not converge in {cap} iterations")


def recover_active_set(problem, p):
    """Strictly active constraints (multipliers above ACTIVE_TOL) at p."""
    from .errors import InfeasibleParameter

    res = solve_qp(problem, p)
    if res.status != OPTIMAL:
        raise InfeasibleParameter(f"QP infeasible at p={p}")
    return res.active
