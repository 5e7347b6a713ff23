"""Problem and solution data model.

Two problem forms exist: the raw form carries a parameter-variable cross
term g and parameter constraint matrix E,

    min 1/2 u'Hu + p'gu   s.t.  G u <= b + E p,

and the standard form eliminates the cross term by the change of
variables z = u + H^-1 g' p,

    min 1/2 z'Hz          s.t.  G z <= b + S p,   S = E + G H^-1 g'.

All construction-time checks are structural (shapes, symmetry); positive
definiteness and domain boundedness are verified by `validate`, which
reports instead of raising.  Instances are treated as immutable and are
safe to share across threads; the derived factorizations are cached
lazily and never mutate visible state.
"""

import numpy as np

from . import lp, numerics
from .errors import NotPositiveDefinite

SYMMETRY_TOL = 1e-10


def _as_matrix(M, name, rows=None, cols=None):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if rows is not None and M.shape[0] != rows:
        raise ValueError(f"{name} has {M.shape[0]} rows, expected {rows}")
    if cols is not None and M.shape[1] != cols:
        raise ValueError(f"{name} has {M.shape[1]} columns, expected {cols}")
    return M


class ParamDomain:
    """Polyhedral parameter set {p | A p <= b}."""

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("theta: row counts of A and b differ")

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        d = lower.shape[0]
        return cls(np.vstack([np.eye(d), -np.eye(d)]), np.concatenate([upper, -lower]))

    @property
    def dim(self):
        return self.A.shape[1]

    def polyhedron(self):
        return lp.Polyhedron(self.A, self.b)

    def contains(self, p, tol=lp.FEAS_TOL):
        return bool(np.all(self.A @ p <= self.b + tol))

    def is_bounded(self):
        """Boundedness check: max of +-p_k over the set for each coordinate."""
        poly = self.polyhedron()
        for k in range(self.dim):
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[k] = sign
                if lp.lp_solve(c, poly).status == lp.UNBOUNDED:
                    return False
        return True


class MpQpRawProblem:
    """mpQP with a linear cost cross term: min 1/2 u'Hu + p'gu, Gu <= b + Ep."""

    def __init__(self, H, g, G, b, E, theta):
        self.H = _as_matrix(H, "H")
        nz = self.H.shape[1]
        self.G = _as_matrix(G, "G", cols=nz)
        nc = self.G.shape[0]
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.b.shape[0] != nc:
            raise ValueError(f"b has {self.b.shape[0]} entries, expected {nc}")
        self.theta = theta
        self.E = _as_matrix(E, "E", rows=nc, cols=theta.dim)
        self.g = _as_matrix(g, "g", rows=theta.dim, cols=nz)
        if np.max(np.abs(self.H - self.H.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(self.H))):
            raise ValueError("H is not symmetric")

    @property
    def nz(self):
        return self.H.shape[0]

    @property
    def nc(self):
        return self.G.shape[0]

    @property
    def np_(self):
        return self.theta.dim


class MpQpProblem:
    """Standard-form mpQP: min 1/2 z'Hz s.t. G z <= b + S p, p in theta.

    `back_shift` (nz x np), when present, maps standard-form optimizers
    back to the raw variables: u*(p) = z*(p) - back_shift @ p.
    """

    def __init__(self, H, G, b, S, theta, back_shift=None, manifest=None):
        self.H = _as_matrix(H, "H")
        nz = self.H.shape[1]
        self.G = _as_matrix(G, "G", cols=nz)
        nc = self.G.shape[0]
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.b.shape[0] != nc:
            raise ValueError(f"b has {self.b.shape[0]} entries, expected {nc}")
        self.theta = theta
        self.S = _as_matrix(S, "S", rows=nc, cols=theta.dim)
        self.back_shift = None if back_shift is None else _as_matrix(
            back_shift, "back_shift", rows=nz, cols=theta.dim)
        self.manifest = dict(manifest) if manifest else {}
        if np.max(np.abs(self.H - self.H.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(self.H))):
            raise ValueError("H is not symmetric")
        self._h_factor = None
        self._HiGT = None
        self._GHiGT = None

    @property
    def nz(self):
        return self.H.shape[0]

    @property
    def nc(self):
        return self.G.shape[0]

    @property
    def np_(self):
        return self.theta.dim

    # Derived factorizations, computed once on first use.
    def h_factor(self):
        if self._h_factor is None:
            self._h_factor = numerics.cholesky(self.H)
        return self._h_factor

    def hinv_GT(self):
        """H^-1 G' (nz x nc)."""
        if self._HiGT is None:
            self._HiGT = numerics.spd_solve(self.h_factor(), self.G.T)
        return self._HiGT

    def G_hinv_GT(self):
        """G H^-1 G' (nc x nc); every active-set block is a submatrix of it."""
        if self._GHiGT is None:
            M = self.G @ self.hinv_GT()
            self._GHiGT = 0.5 * (M + M.T)
        return self._GHiGT

    def back_map(self, z, p):
        if self.back_shift is None:
            return z
        return z - self.back_shift @ p


def transform_to_standard(raw):
    """Change of variables z = u + H^-1 g' p; returns the standard form.

    Raises NotPositiveDefinite when H has no Cholesky factorization.
    """
    F = numerics.cholesky(raw.H)  # raises NotPositiveDefinite
    shift = numerics.spd_solve(F, raw.g.T)  # H^-1 g', nz x np
    S = raw.E + raw.G @ shift
    return MpQpProblem(raw.H.copy(), raw.G.copy(), raw.b.copy(), S, raw.theta,
                       back_shift=shift)


def canonical_active_set(indices, nc):
    """Sorted duplicate-free constraint-index tuple (0-based)."""
    out = tuple(sorted(int(i) for i in indices))
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate indices in active set {out}")
    if out and (out[0] < 0 or out[-1] >= nc):
        raise ValueError(f"active-set indices {out} outside [0, {nc})")
    return out


class RegionSolution:
    """Affine laws and defining hyperplanes of one optimal active set.

    k, K give the primal law z*(p) = k + K p; q, Q give the multipliers of
    the active rows, lam_A(p) = q + Q p, ordered like `active_set`.
    e_primal lists the defining inactive-constraint hyperplanes, e_dual
    the defining active-constraint (multiplier) hyperplanes.
    """

    def __init__(self, active_set, k, K, q, Q, e_primal=(), e_dual=()):
        self.active_set = tuple(active_set)
        self.k = np.asarray(k, dtype=float).reshape(-1)
        self.K = _as_matrix(K, "K", rows=self.k.shape[0])
        na = len(self.active_set)
        self.q = np.asarray(q, dtype=float).reshape(-1)
        self.Q = np.asarray(Q, dtype=float).reshape(na, self.K.shape[1])
        if self.q.shape[0] != na:
            raise ValueError(f"q has {self.q.shape[0]} rows for {na} active constraints")
        self.e_primal = tuple(e_primal)
        self.e_dual = tuple(e_dual)
        if set(self.e_primal) & set(self.active_set):
            raise ValueError("e_primal overlaps the active set")
        if not set(self.e_dual) <= set(self.active_set):
            raise ValueError("e_dual not contained in the active set")

    def zopt(self, p):
        return self.k + self.K @ p

    def lam_active(self, p):
        return self.q + self.Q @ p

    def q_tilde(self, nc):
        """Zero-padded multiplier offset over all nc constraints."""
        qt = np.zeros(nc)
        qt[list(self.active_set)] = self.q
        return qt

    def Q_tilde(self, nc):
        Qt = np.zeros((nc, self.Q.shape[1]))
        Qt[list(self.active_set)] = self.Q
        return Qt

    def with_hyperplanes(self, e_primal, e_dual):
        return RegionSolution(self.active_set, self.k, self.K, self.q, self.Q,
                              e_primal, e_dual)


class ExplicitSolution:
    """The piecewise-affine parametric solution: one RegionSolution per region."""

    def __init__(self, problem, regions):
        self.problem = problem
        self.regions = list(regions)
        keys = [r.active_set for r in self.regions]
        if len(set(keys)) != len(keys):
            raise ValueError("region active sets are not pairwise distinct")

    @property
    def R(self):
        return len(self.regions)


class ValidationReport:
    """Outcome of non-throwing problem validation."""

    def __init__(self):
        self.checks = []  # (name, passed, detail)

    def add(self, name, passed, detail=""):
        self.checks.append((name, bool(passed), detail))

    @property
    def ok(self):
        return all(passed for _, passed, _ in self.checks)

    def failures(self):
        return [(n, d) for n, p, d in self.checks if not p]

    def __str__(self):
        lines = [f"[{'ok' if p else 'FAIL'}] {n}" + (f": {d}" if d else "")
                 for n, p, d in self.checks]
        return "\n".join(lines)


def validate(problem):
    """Structural health report for a standard-form problem; never raises."""
    report = ValidationReport()
    H = problem.H
    sym_err = float(np.max(np.abs(H - H.T))) if H.size else 0.0
    report.add("H symmetric", sym_err <= SYMMETRY_TOL * max(1.0, np.max(np.abs(H))),
               f"max asymmetry {sym_err:.2e}")
    try:
        F = numerics.cholesky(H)
        margin = float(np.min(np.diag(F.L)) ** 2)
        report.add("H positive definite", True, f"smallest pivot {margin:.3e}")
    except NotPositiveDefinite as exc:
        report.add("H positive definite", False, str(exc))
    dims_ok = (problem.G.shape == (problem.nc, problem.nz)
               and problem.S.shape == (problem.nc, problem.np_)
               and problem.b.shape == (problem.nc,))
    report.add("dimensions consistent", dims_ok)
    report.add("at least one constraint", problem.nc >= 1, f"nc={problem.nc}")
    bounded = problem.theta.is_bounded()
    report.add("theta bounded", bounded)
    if bounded:
        _, radius = lp.chebyshev_center(problem.theta.polyhedron())
        report.add("theta nonempty", radius > lp.EMPTY_TOL, f"radius {radius:.3e}")
    return report
