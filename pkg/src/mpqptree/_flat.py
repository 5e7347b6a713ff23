"""Flattened array form of a storage tree for the evaluation kernels.

Everything the online evaluator touches lives in contiguous numpy
arrays: per-node hyperplane index lists, per-payload scalars/directions,
CSR-style sparse rows, and per-root dense row-position lookups.  Both
the compiled and the pure-Python kernels operate on this structure; it
is also what the binary serializer writes and reads.

Node ids are positions in the tree's BFS order (roots first, then by
depth and region id), which is also the scan order of `locate`.
"""

import numpy as np


class FlatTree:
    def __init__(self):
        self.nz_store = 0
        self.np_ = 0
        self.nc = 0
        self.n_u = 0
        self.mpc_mode = False
        self.problem_hash = b""
        self.theta_A = None
        self.theta_b = None
        # nodes
        self.node_region = None   # int32[N]
        self.node_parent = None   # int32[N], -1 for roots (BFS ids)
        self.node_root = None     # int32[N], root ordinal
        self.path_ptr = None      # int64[N+1]
        self.path_pay = None      # int32[total path length], root-to-node order
        self.ep_ptr = None
        self.ep_idx = None
        self.ed_ptr = None
        self.ed_idx = None
        self.sp_ptr = None
        self.sp_idx = None
        self.sd_ptr = None
        self.sd_idx = None
        # payloads
        self.pay_c = None         # f64[P]
        self.pay_v = None         # f64[P, np]
        self.pay_f = None         # f64[P, nz_store]
        self.fe_ptr = None
        self.fe_idx = None
        self.fe_val = None
        self.de_ptr = None
        self.de_idx = None
        self.de_val = None
        self.pay_kind = None      # int32[P]: 0 add, 1 remove
        self.pay_constraint = None
        # roots
        self.root_k = None        # f64[nroots, nz_store]
        self.root_K = None        # f64[nroots, nz_store, np]
        self.root_prow = None     # int32[nroots, nc] -> global row position or -1
        self.root_pb = None       # f64[n_prows]
        self.root_pA = None       # f64[n_prows, np]
        self.root_drow = None
        self.root_dq = None
        self.root_dQ = None

    @property
    def n_nodes(self):
        return len(self.node_region)

    @property
    def n_payloads(self):
        return len(self.pay_c)

    @property
    def n_roots(self):
        return self.root_k.shape[0]


def _csr(list_of_lists, dtype=np.int32, val_lists=None):
    ptr = np.zeros(len(list_of_lists) + 1, dtype=np.int64)
    for i, lst in enumerate(list_of_lists):
        ptr[i + 1] = ptr[i] + len(lst)
    idx = np.concatenate([np.asarray(l, dtype=dtype) for l in list_of_lists]) \
        if ptr[-1] else np.zeros(0, dtype=dtype)
    if val_lists is None:
        return ptr, idx
    val = np.concatenate([np.asarray(v, dtype=float) for v in val_lists]) \
        if ptr[-1] else np.zeros(0)
    return ptr, idx, val


def flatten(tree):
    """Build the FlatTree from an in-memory StorageTree."""
    problem = tree.problem
    order = tree.bfs_order()
    pos = {node_idx: bfs for bfs, node_idx in enumerate(order)}
    N = len(order)
    flat = FlatTree()
    flat.nz_store = tree.n_u if tree.mpc_mode else problem.nz
    flat.np_ = problem.np_
    flat.nc = problem.nc
    flat.n_u = tree.n_u
    flat.mpc_mode = tree.mpc_mode
    flat.theta_A = np.ascontiguousarray(problem.theta.A)
    flat.theta_b = np.ascontiguousarray(problem.theta.b)

    flat.node_region = np.array([tree.nodes[i].region_id for i in order], dtype=np.int32)
    flat.node_parent = np.array(
        [-1 if tree.nodes[i].parent is None else pos[tree.nodes[i].parent]
         for i in order], dtype=np.int32)
    flat.node_root = np.array([tree.nodes[i].root_index for i in order], dtype=np.int32)

    # payloads in BFS-node order, chain order preserved
    payloads = []
    node_pay = []
    for i in order:
        start = len(payloads)
        payloads.extend(tree.nodes[i].chain)
        node_pay.append(list(range(start, len(payloads))))
    P = len(payloads)
    flat.pay_c = np.array([u.c for u in payloads], dtype=float)
    flat.pay_v = (np.vstack([u.v for u in payloads]) if P
                  else np.zeros((0, flat.np_)))
    f_rows = []
    for u in payloads:
        f = u.f[:tree.n_u] if tree.mpc_mode else u.f
        f_rows.append(f)
    flat.pay_f = np.vstack(f_rows) if P else np.zeros((0, flat.nz_store))
    flat.pay_kind = np.array([0 if u.edge_kind == "add" else 1 for u in payloads],
                             dtype=np.int32)
    flat.pay_constraint = np.array([u.constraint for u in payloads], dtype=np.int32)

    fe_idx, fe_val, de_idx, de_val = [], [], [], []
    for u in payloads:
        fi = sorted(u.f_entries)
        fe_idx.append(fi)
        fe_val.append([u.f_entries[n] for n in fi])
        di = sorted(u.d_entries)
        de_idx.append(di)
        de_val.append([u.d_entries[n] for n in di])
    flat.fe_ptr, flat.fe_idx, flat.fe_val = _csr(fe_idx, val_lists=fe_val)
    flat.de_ptr, flat.de_idx, flat.de_val = _csr(de_idx, val_lists=de_val)

    # root-to-node payload paths
    paths = []
    for bfs, i in enumerate(order):
        chain_ids = []
        j = bfs
        while flat.node_parent[j] >= 0:
            chain_ids = node_pay[j] + chain_ids
            j = flat.node_parent[j]
        paths.append(chain_ids)
    flat.path_ptr, flat.path_pay = _csr(paths)

    flat.ep_ptr, flat.ep_idx = _csr([tree.nodes[i].e_primal for i in order])
    flat.ed_ptr, flat.ed_idx = _csr([tree.nodes[i].e_dual for i in order])
    flat.sp_ptr, flat.sp_idx = _csr([tree.nodes[i].s_primal for i in order])
    flat.sd_ptr, flat.sd_idx = _csr([tree.nodes[i].s_dual for i in order])

    # roots: dense constraint -> stored-row lookup
    nroots = len(tree.roots)
    flat.root_k = np.zeros((nroots, flat.nz_store))
    flat.root_K = np.zeros((nroots, flat.nz_store, flat.np_))
    flat.root_prow = -np.ones((nroots, flat.nc), dtype=np.int32)
    flat.root_drow = -np.ones((nroots, flat.nc), dtype=np.int32)
    pb, pA, dq, dQ = [], [], [], []
    for ridx, r in enumerate(tree.roots):
        data = tree.root_data[r]
        node = tree.nodes[r]
        flat.root_k[ridx] = data.k[:flat.nz_store]
        flat.root_K[ridx] = data.K[:flat.nz_store]
        for local, n in enumerate(node.s_primal):
            flat.root_prow[ridx, n] = len(pb) + local
        pb.extend(data.sp_rows_b)
        pA.extend(data.sp_rows_A)
        for local, n in enumerate(data.sd_stored):
            flat.root_drow[ridx, n] = len(dq) + local
        dq.extend(data.sd_rows_q)
        dQ.extend(data.sd_rows_Q)
    flat.root_pb = np.asarray(pb, dtype=float)
    flat.root_pA = (np.vstack(pA) if pA else np.zeros((0, flat.np_)))
    flat.root_dq = np.asarray(dq, dtype=float)
    flat.root_dQ = (np.vstack(dQ) if dQ else np.zeros((0, flat.np_)))
    return flat
