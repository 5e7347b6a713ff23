"""Pure-Python evaluation kernels over a FlatTree.

Mirror of the compiled extension; kept importable everywhere.  Paths are
short (tree depth times chain length), so plain loops with numpy dots
are fine for correctness work; the compiled twin exists for bulk point
location.
"""

import numpy as np

BACKEND_NAME = "python"


def _scalar(flat, pay, p, scratch):
    if scratch is not None:
        if scratch.scalar_valid[pay]:
            return scratch.scalar_cache[pay]
        val = flat.pay_c[pay] + float(flat.pay_v[pay] @ p)
        scratch.scalar_cache[pay] = val
        scratch.scalar_valid[pay] = True
        return val
    return flat.pay_c[pay] + float(flat.pay_v[pay] @ p)


def _sparse_get(idx, val, lo, hi, n):
    k = np.searchsorted(idx[lo:hi], n)
    if k < hi - lo and idx[lo + k] == n:
        return val[lo + k]
    return 0.0


def eval_solution(flat, node, p, scratch=None):
    z = flat.root_k[flat.node_root[node]] + flat.root_K[flat.node_root[node]] @ p
    for t in range(flat.path_ptr[node], flat.path_ptr[node + 1]):
        pay = flat.path_pay[t]
        z = z + flat.pay_f[pay] * _scalar(flat, pay, p, scratch)
    return z


def _root_primal(flat, pos, p, scratch):
    if scratch is not None:
        if scratch.rp_valid[pos]:
            return scratch.rp_cache[pos]
        val = flat.root_pb[pos] + float(flat.root_pA[pos] @ p)
        scratch.rp_cache[pos] = val
        scratch.rp_valid[pos] = True
        return val
    return flat.root_pb[pos] + float(flat.root_pA[pos] @ p)


def _root_dual(flat, pos, p, scratch):
    if scratch is not None:
        if scratch.rd_valid[pos]:
            return scratch.rd_cache[pos]
        val = -flat.root_dq[pos] - float(flat.root_dQ[pos] @ p)
        scratch.rd_cache[pos] = val
        scratch.rd_valid[pos] = True
        return val
    return -flat.root_dq[pos] - float(flat.root_dQ[pos] @ p)


def eval_hyperplane(flat, node, n, p, primal, scratch=None):
    """Value of hyperplane n at node; <= 0 means satisfied.

    `primal` selects the branch; the caller is responsible for n being a
    stored hyperplane of the node.
    """
    root = flat.node_root[node]
    if primal:
        pos = flat.root_prow[root, n]
        s = _root_primal(flat, pos, p, scratch) if pos >= 0 else 0.0
        for t in range(flat.path_ptr[node], flat.path_ptr[node + 1]):
            pay = flat.path_pay[t]
            coef = _sparse_get(flat.fe_idx, flat.fe_val,
                               flat.fe_ptr[pay], flat.fe_ptr[pay + 1], n)
            if coef != 0.0:
                s += coef * _scalar(flat, pay, p, scratch)
        return s
    pos = flat.root_drow[root, n]
    s = _root_dual(flat, pos, p, scratch) if pos >= 0 else 0.0
    for t in range(flat.path_ptr[node], flat.path_ptr[node + 1]):
        pay = flat.path_pay[t]
        coef = _sparse_get(flat.de_idx, flat.de_val,
                           flat.de_ptr[pay], flat.de_ptr[pay + 1], n)
        if coef != 0.0:
            s += coef * _scalar(flat, pay, p, scratch)
    return s


def node_matches(flat, node, p, tol, scratch=None):
    for t in range(flat.ep_ptr[node], flat.ep_ptr[node + 1]):
        if eval_hyperplane(flat, node, flat.ep_idx[t], p, True, scratch) > tol:
            return False
    for t in range(flat.ed_ptr[node], flat.ed_ptr[node + 1]):
        if eval_hyperplane(flat, node, flat.ed_idx[t], p, False, scratch) > tol:
            return False
    return True


def locate(flat, p, tol, scratch=None):
    """First node (BFS order) whose stored hyperplanes all hold; -1 if none."""
    if np.any(flat.theta_A @ p > flat.theta_b + tol):
        return -1
    for node in range(flat.n_nodes):
        if node_matches(flat, node, p, tol, scratch):
            return node
    return -1


def locate_eval_batch(flat, points, tol):
    """Vector of node ids and law values for many parameters at once."""
    npts = points.shape[0]
    nodes = np.empty(npts, dtype=np.int64)
    Z = np.full((npts, flat.nz_store), np.nan)
    from .evaluator import EvalScratch
    scratch = EvalScratch(flat)
    for i in range(npts):
        scratch.reset()
        node = locate(flat, points[i], tol, scratch)
        nodes[i] = node
        if node >= 0:
            Z[i] = eval_solution(flat, node, points[i], scratch)
    return nodes, Z
