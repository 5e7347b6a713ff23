"""Constrained finite-time optimal control front end.

Turns a CFTOC problem

    min 1/2 sum_{t<N} (x_t'Q x_t + u_t'R u_t) + 1/2 x_N' P x_N
    s.t. x_{t+1} = A x_t + B u_t,  x_0 = p,
         Hx x_t + Hu u_t + h <= 0   (t = 0..N-1),
         Hx x_N + h <= 0,

into a raw mpQP in the stacked inputs by eliminating the states.  Rows
that lose every coefficient in the condensing (e.g. input rows of the
terminal stage) are dropped; rows that keep only a parameter dependence
(the t = 0 state rows) are genuine constraints of the mpQP and stay.

Also hosts the benchmark problem generators: a chain of integrator-like
lags 1/(s+1)^n, and a spring-coupled mass chain with one or two force
inputs.
"""

from math import comb

import numpy as np

from .errors import NoConvergence
from .problem import MpQpRawProblem, ParamDomain

# The parameter exploration box is the initial-state box inflated by this
# factor; the actual state bounds live in the constraint rows, so the
# domain never clips a critical region.
THETA_INFLATION = 1.5
_TRIVIAL_ROW_TOL = 1e-12


class CftocProblem:
    """Data of one CFTOC instance; see the module docstring for the form."""

    def __init__(self, A, B, Q, R_w, P_N, Hx, Hu, h, N, theta, manifest=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.R_w = np.atleast_2d(np.asarray(R_w, dtype=float))
        self.P_N = np.atleast_2d(np.asarray(P_N, dtype=float))
        self.Hx = np.atleast_2d(np.asarray(Hx, dtype=float))
        self.Hu = np.atleast_2d(np.asarray(Hu, dtype=float))
        self.h = np.asarray(h, dtype=float).reshape(-1)
        self.N = int(N)
        self.theta = theta
        self.manifest = dict(manifest) if manifest else {}
        nx, nu = self.B.shape
        if self.A.shape != (nx, nx):
            raise ValueError("A/B dimension mismatch")
        if self.Hx.shape[0] != self.Hu.shape[0] or self.Hx.shape[0] != self.h.shape[0]:
            raise ValueError("stage constraint row counts differ")
        if self.Hx.shape[1] != nx or self.Hu.shape[1] != nu:
            raise ValueError("stage constraint column counts differ")
        for M, name in ((self.Q, "Q"), (self.P_N, "P_N")):
            if np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) < -1e-10:
                raise ValueError(f"{name} is not positive semidefinite")
        if np.min(np.linalg.eigvalsh(0.5 * (self.R_w + self.R_w.T))) <= 0:
            raise ValueError("R_w is not positive definite")

    @property
    def nx(self):
        return self.A.shape[0]

    @property
    def nu(self):
        return self.B.shape[1]


class CondensedMatrices:
    """Stacked prediction matrices over the horizon (t = 0..N)."""

    def __init__(self, A_stack, B_stack, Qx_stack, Qu_stack, Hx_stack, Hu_stack, h_stack):
        self.A_stack = A_stack
        self.B_stack = B_stack
        self.Qx_stack = Qx_stack
        self.Qu_stack = Qu_stack
        self.Hx_stack = Hx_stack
        self.Hu_stack = Hu_stack
        self.h_stack = h_stack


def _pade6_expm(M):
    """Scaling-and-squaring matrix exponential with a diagonal Pade(6) core."""
    M = np.asarray(M, dtype=float)
    norm = np.max(np.abs(M).sum(axis=1)) if M.size else 0.0
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    A = M / (2.0 ** s)
    n = A.shape[0]
    # Pade(6,6) coefficients c_k = 6!(12-k)! / (12! k! (6-k)!)
    c = np.array([1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280])
    A2 = A @ A
    U = A @ (c[1] * np.eye(n) + c[3] * A2 + c[5] * A2 @ A2)
    V = c[0] * np.eye(n) + c[2] * A2 + c[4] * A2 @ A2 + c[6] * A2 @ A2 @ A2
    F = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


def zoh_discretize(Ac, Bc, Ts):
    """Zero-order-hold discretization via the augmented matrix exponential."""
    Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
    Bc = np.atleast_2d(np.asarray(Bc, dtype=float))
    if Ts <= 0:
        raise ValueError("sampling time must be positive")
    nx, nu = Bc.shape
    aug = np.zeros((nx + nu, nx + nu))
    aug[:nx, :nx] = Ac * Ts
    aug[:nx, nx:] = Bc * Ts
    E = _pade6_expm(aug)
    return E[:nx, :nx], E[:nx, nx:]


def dare_terminal_cost(A, B, Q, R_w, tol=1e-12, max_iter=100_000):
    """Fixed point of the Riccati recursion, iterated from P = Q."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R_w = np.atleast_2d(np.asarray(R_w, dtype=float))
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        gain = np.linalg.solve(R_w + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
        P_next = 0.5 * (P_next + P_next.T)
        if np.max(np.abs(P_next - P)) < tol:
            return P_next
        P = P_next
    raise NoConvergence("Riccati iteration did not converge")


def stack_matrices(cftoc):
    """Prediction stacks for x = A_stack x0 + B_stack u."""
    A, B, N = cftoc.A, cftoc.B, cftoc.N
    nx, nu = cftoc.nx, cftoc.nu
    A_stack = np.zeros(((N + 1) * nx, nx))
    powers = [np.eye(nx)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    for t in range(N + 1):
        A_stack[t * nx:(t + 1) * nx] = powers[t]
    B_stack = np.zeros(((N + 1) * nx, N * nu))
    for t in range(1, N + 1):
        for s_ in range(t):
            B_stack[t * nx:(t + 1) * nx, s_ * nu:(s_ + 1) * nu] = powers[t - 1 - s_] @ B
    Qx_stack = np.zeros(((N + 1) * nx, (N + 1) * nx))
    for t in range(N):
        Qx_stack[t * nx:(t + 1) * nx, t * nx:(t + 1) * nx] = cftoc.Q
    Qx_stack[N * nx:, N * nx:] = cftoc.P_N
    Qu_stack = np.kron(np.eye(N), cftoc.R_w)
    mrow = cftoc.Hx.shape[0]
    Hx_stack = np.kron(np.eye(N + 1), cftoc.Hx)
    Hu_stack = np.zeros(((N + 1) * mrow, N * nu))
    Hu_stack[:N * mrow, :] = np.kron(np.eye(N), cftoc.Hu)
    h_stack = np.tile(cftoc.h, N + 1)
    return CondensedMatrices(A_stack, B_stack, Qx_stack, Qu_stack, Hx_stack, Hu_stack, h_stack)


def condense(cftoc):
    """Eliminate the states; returns the raw mpQP with parameter p = x0.

    H = Qu + B'QxB, g = A'QxB, G = HxB + Hu, b = -h, E = -HxA; rows with
    no z and no p dependence must be trivially satisfiable and are
    dropped, anything else is kept (including parameter-only rows, which
    carry the t = 0 state constraints).
    """
    st = stack_matrices(cftoc)
    H = st.Qu_stack + st.B_stack.T @ st.Qx_stack @ st.B_stack
    H = 0.5 * (H + H.T)
    g = st.A_stack.T @ st.Qx_stack @ st.B_stack
    G = st.Hx_stack @ st.B_stack + st.Hu_stack
    b = -st.h_stack
    E = -st.Hx_stack @ st.A_stack

    keep = []
    for i in range(G.shape[0]):
        structural = max(np.max(np.abs(G[i])), np.max(np.abs(E[i])))
        if structural <= _TRIVIAL_ROW_TOL:
            if b[i] < -_TRIVIAL_ROW_TOL:
                raise ValueError(f"structurally infeasible constraint row {i}")
            continue
        keep.append(i)
    manifest = dict(cftoc.manifest)
    manifest["n_u"] = cftoc.nu
    manifest["horizon"] = cftoc.N
    return MpQpRawProblem(H, g, G[keep], b[keep], E[keep], cftoc.theta), manifest


def _lag_chain_realization(n):
    """Controllable canonical form of 1/(s+1)^n."""
    coeffs = [float(comb(n, k)) for k in range(n)]  # a_0..a_{n-1}
    Ac = np.zeros((n, n))
    if n > 1:
        Ac[:-1, 1:] = np.eye(n - 1)
    Ac[-1, :] = -np.asarray(coeffs)
    Bc = np.zeros((n, 1))
    Bc[-1, 0] = 1.0
    return Ac, Bc


def _box_stage_constraints(nx, nu, x_bound, u_bound):
    Hx = np.vstack([np.eye(nx), -np.eye(nx), np.zeros((2 * nu, nx))])
    Hu = np.vstack([np.zeros((2 * nx, nu)), np.eye(nu), -np.eye(nu)])
    h = -np.concatenate([np.full(2 * nx, x_bound), np.full(2 * nu, u_bound)])
    return Hx, Hu, h


def build_problem1(n, N):
    """Lag chain 1/(s+1)^n, unit sampling, Q = R = I, |x| <= 10, |u| <= 1."""
    if n < 1 or N < 1:
        raise ValueError("need n >= 1 and N >= 1")
    Ac, Bc = _lag_chain_realization(n)
    A, B = zoh_discretize(Ac, Bc, 1.0)
    Q = np.eye(n)
    R_w = np.eye(1)
    P_N = dare_terminal_cost(A, B, Q, R_w)
    Hx, Hu, h = _box_stage_constraints(n, 1, 10.0, 1.0)
    theta = ParamDomain.box(-THETA_INFLATION * 10.0 * np.ones(n),
                            THETA_INFLATION * 10.0 * np.ones(n))
    manifest = {
        "generator": "p1", "n": n, "N": N, "Ts": 1.0,
        "x_bound": 10.0, "u_bound": 1.0, "q_weight": 1.0, "r_weight": 1.0,
        "realization": "controllable_canonical",
        "theta_inflation": THETA_INFLATION,
    }
    return CftocProblem(A, B, Q, R_w, P_N, Hx, Hu, h, N, theta, manifest)


def _mass_chain_realization(n_M, two_inputs):
    """Unit masses in a chain between two walls: wall springs at both ends,
    springs between neighbors.  States are (positions, velocities)."""
    K = np.zeros((n_M, n_M))
    for i in range(n_M):
        K[i, i] = -2.0
        if i > 0:
            K[i, i - 1] = 1.0
        if i + 1 < n_M:
            K[i, i + 1] = 1.0
    nu = 2 if two_inputs else 1
    F = np.zeros((n_M, nu))
    F[0, 0] = 1.0
    if two_inputs:
        F[0, 1] = -1.0
        F[1, 1] = 1.0
    nx = 2 * n_M
    Ac = np.zeros((nx, nx))
    Ac[:n_M, n_M:] = np.eye(n_M)
    Ac[n_M:, :n_M] = K
    Bc = np.zeros((nx, nu))
    Bc[n_M:, :] = F
    return Ac, Bc


def build_problem23(n_M, N, two_inputs=False):
    """Spring-coupled mass chain, Ts = 0.5, Q = 100 I, R = I, |x| <= 4, |u| <= 0.5."""
    if n_M < 1 or N < 1:
        raise ValueError("need n_M >= 1 and N >= 1")
    if two_inputs and n_M < 2:
        raise ValueError("the inter-mass input needs at least two masses")
    Ac, Bc = _mass_chain_realization(n_M, two_inputs)
    A, B = zoh_discretize(Ac, Bc, 0.5)
    nx, nu = B.shape
    Q = 100.0 * np.eye(nx)
    R_w = np.eye(nu)
    P_N = dare_terminal_cost(A, B, Q, R_w)
    Hx, Hu, h = _box_stage_constraints(nx, nu, 4.0, 0.5)
    theta = ParamDomain.box(-THETA_INFLATION * 4.0 * np.ones(nx),
                            THETA_INFLATION * 4.0 * np.ones(nx))
    manifest = {
        "generator": "p3" if two_inputs else "p2", "n_M": n_M, "N": N, "Ts": 0.5,
        "x_bound": 4.0, "u_bound": 0.5, "q_weight": 100.0, "r_weight": 1.0,
        "topology": "wall_to_wall_spring_chain",
        "theta_inflation": THETA_INFLATION,
    }
    return CftocProblem(A, B, Q, R_w, P_N, Hx, Hu, h, N, theta, manifest)
