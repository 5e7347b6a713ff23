"""Online evaluation of the compressed solution.

Walking the path from the root to a node accumulates the rank-one
corrections of the law (solution evaluation) or of single hyperplane
rows (region membership).  Point location is a sequential scan over the
nodes in BFS order; the first node whose stored hyperplanes all hold at
the query point wins.

Two interchangeable kernel backends exist: the compiled extension
(`mpqptree._evalcore`, built from Cython) and the pure-Python mirror
(`mpqptree._evalcore_py`).  The fastest available one is selected at
import; `set_backend` / the MPQPTREE_BACKEND environment variable
override the choice.  Results agree across backends to floating-point
roundoff, and scratch reuse never changes a value bit.
"""

import os

import numpy as np

from . import _evalcore_py
from ._flat import FlatTree, flatten
from .errors import HyperplaneNotStored, UnknownNode, UnknownRegion

try:
    from . import _evalcore
    _HAVE_COMPILED = True
except ImportError:
    _evalcore = None
    _HAVE_COMPILED = False

MEMBERSHIP_TOL = 1e-8

_backends = {"python": _evalcore_py}
if _HAVE_COMPILED:
    _backends["cython"] = _evalcore

_default = os.environ.get("MPQPTREE_BACKEND", "cython" if _HAVE_COMPILED else "python")
if _default not in _backends:
    _default = "python"


def available_backends():
    return tuple(sorted(_backends))


def get_backend(name=None):
    name = name or _default
    if name not in _backends:
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}")
    return _backends[name]


def set_backend(name):
    global _default
    if name not in _backends:
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}")
    _default = name


def backend_name():
    return _default


class EvalScratch:
    """Per-query memo: payload scalars and root row values for one p."""

    def __init__(self, flat):
        self.scalar_cache = np.zeros(flat.n_payloads)
        self.scalar_valid = np.zeros(flat.n_payloads, dtype=np.uint8)
        self.rp_cache = np.zeros(len(flat.root_pb))
        self.rp_valid = np.zeros(len(flat.root_pb), dtype=np.uint8)
        self.rd_cache = np.zeros(len(flat.root_dq))
        self.rd_valid = np.zeros(len(flat.root_dq), dtype=np.uint8)

    def reset(self):
        self.scalar_valid[:] = 0
        self.rp_valid[:] = 0
        self.rd_valid[:] = 0


def as_flat(tree):
    """FlatTree from a StorageTree (cached) or pass a FlatTree through."""
    if isinstance(tree, FlatTree):
        return tree
    flat = getattr(tree, "_flat", None)
    if flat is None:
        flat = flatten(tree)
        tree._flat = flat
    return flat


def _check_node(flat, node):
    if not 0 <= node < flat.n_nodes:
        raise UnknownNode(f"node {node} outside [0, {flat.n_nodes})")


def eval_solution(tree, node, p, scratch=None, backend=None):
    """Law value at p for a node: k_r + K_r p plus the path corrections.

    In mpc mode the result has the first n_u components only.
    """
    flat = as_flat(tree)
    _check_node(flat, node)
    p = np.asarray(p, dtype=float).reshape(-1)
    return get_backend(backend).eval_solution(flat, node, p, scratch)


def eval_hyperplane(tree, node, n, p, scratch=None, backend=None):
    """Stored-hyperplane value at p; <= 0 means the inequality holds.

    `n` is a constraint index in the node's defining sets: the primal
    branch is taken when n is in e_primal, the dual branch when it is in
    e_dual.  Raises HyperplaneNotStored when n is not available along
    the node's path (which indicates a broken tree build).
    """
    flat = as_flat(tree)
    _check_node(flat, node)
    p = np.asarray(p, dtype=float).reshape(-1)
    ep = flat.ep_idx[flat.ep_ptr[node]:flat.ep_ptr[node + 1]]
    ed = flat.ed_idx[flat.ed_ptr[node]:flat.ed_ptr[node + 1]]
    if n in ep:
        primal = True
    elif n in ed:
        primal = False
    else:
        raise HyperplaneNotStored(f"hyperplane {n} not defining for node {node}")
    sets_ptr, sets_idx = (flat.sp_ptr, flat.sp_idx) if primal else (flat.sd_ptr, flat.sd_idx)
    j = node
    while j >= 0:
        stored = sets_idx[sets_ptr[j]:sets_ptr[j + 1]]
        if n not in stored:
            raise HyperplaneNotStored(
                f"hyperplane {n} missing from storage sets at node {j}")
        j = flat.node_parent[j]
    return get_backend(backend).eval_hyperplane(flat, node, n, p, primal, scratch)


def locate(tree, p, tol=MEMBERSHIP_TOL, scratch=None, backend=None):
    """BFS-order scan for the first node containing p; None if infeasible."""
    flat = as_flat(tree)
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != flat.np_:
        raise ValueError(f"parameter has dimension {p.shape[0]}, expected {flat.np_}")
    node = get_backend(backend).locate(flat, p, tol, scratch)
    return None if node < 0 else int(node)


def locate_eval_batch(tree, points, tol=MEMBERSHIP_TOL, backend=None):
    """Locate and evaluate many points; returns (node_ids, laws).

    node id -1 marks infeasible points (law rows are NaN there).
    """
    flat = as_flat(tree)
    points = np.ascontiguousarray(points, dtype=float)
    return get_backend(backend).locate_eval_batch(flat, points, tol)


def node_region(tree, node):
    flat = as_flat(tree)
    _check_node(flat, node)
    return int(flat.node_region[node])


def node_for_region(tree, region_id):
    flat = as_flat(tree)
    hits = np.flatnonzero(flat.node_region == region_id)
    if hits.size == 0:
        raise UnknownRegion(f"region {region_id} not in tree")
    return int(hits[0])


def eval_uncompressed(sol, region, p):
    """Baseline k_i + K_i p straight from the explicit solution."""
    if not 0 <= region < sol.R:
        raise UnknownRegion(f"region {region} outside [0, {sol.R})")
    p = np.asarray(p, dtype=float).reshape(-1)
    return sol.regions[region].zopt(p)


def uncompressed_row_residual(sol, region, n, p):
    """Oracle for hyperplane values: primal row residual or -lambda_n."""
    rs = sol.regions[region]
    problem = sol.problem
    p = np.asarray(p, dtype=float).reshape(-1)
    if n in rs.active_set:
        i = rs.active_set.index(n)
        return -(rs.q[i] + float(rs.Q[i] @ p))
    z = rs.zopt(p)
    return float(problem.G[n] @ z - problem.b[n] - problem.S[n] @ p)
