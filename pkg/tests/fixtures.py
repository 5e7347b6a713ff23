"""Shared fixture instances with frozen constants."""

import numpy as np

from mpqptree.problem import MpQpProblem, ParamDomain


def scalar_instance():
    """nz=1: min z^2 s.t. z <= -1 + p, p in [-2, 2].

    Hand-solved: active set {0} has q = 2, Q = -2, k = -1, K = 1; the
    region splits at p = 1.
    """
    theta = ParamDomain.box([-2.0], [2.0])
    return MpQpProblem([[2.0]], [[1.0]], [-1.0], [[1.0]], theta)


def six_region_instance():
    """Two-parameter instance realizing exactly the active-set lattice
    {{}, {1}, {2}, {3}, {1,2}, {1,3}} (1-based), verified against the
    brute-force QP oracle on a 60x60 parameter grid.
    """
    H = np.eye(2)
    G = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 1.0, 1.2])
    S = np.array([[-1.0, 0.0], [0.0, -1.0], [-1.0, 0.3]])
    theta = ParamDomain.box([-3.0, -3.0], [3.0, 3.0])
    return MpQpProblem(H, G, b, S, theta)


SIX_REGION_SETS = [(), (0,), (1,), (2,), (0, 1), (0, 2)]


def sample_in_ball(center, radius, rng, n):
    """n points uniform in the ball of given center/radius (interior points)."""
    d = center.shape[0]
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    radii = radius * rng.uniform(0.0, 1.0, n) ** (1.0 / d)
    return center + dirs * radii[:, None]
