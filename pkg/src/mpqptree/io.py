"""Serialization: JSON problems/solutions and the binary tree format.

Problem JSON (version 1): {"version", "H", "g"?, "G", "b", "E"? | "S",
"theta": {"A", "b"}, "back_shift"?, "manifest"?} with dense row-major
matrices.  A file carrying g/E is the raw form, one carrying S is the
standard form.  Indices in serialized artifacts are 1-based.

Binary tree format (little-endian): header

    magic "MPQPTREE" | u32 version | u32 nz np nc R n_roots mpc n_u
    | 32-byte problem hash | domain rows | node records in BFS order

Node records hold index sets as u32 arrays and reals as f64.  In the
full-solution file each payload direction is stored normalized: the
largest-magnitude component is folded into the scalars and the sparse
row values, so nz-1 reals are written per direction plus a u32 pivot
position (structural metadata).  The mpc-mode file stores the first n_u
components unscaled instead.  `count_tree_file_reals` re-parses a file
and counts the f64 payload values; it must agree with
tree.memory_lowrank exactly.
"""

import hashlib
import json
import struct

import numpy as np

from ._flat import FlatTree
from .errors import HashMismatch
from .problem import (ExplicitSolution, MpQpProblem, MpQpRawProblem,
                      ParamDomain, RegionSolution)

MAGIC = b"MPQPTREE"
FORMAT_VERSION = 1


def _mat(M):
    return [[float(x) for x in row] for row in np.atleast_2d(M)]


def _vec(v):
    return [float(x) for x in np.asarray(v).reshape(-1)]


def problem_to_dict(problem):
    if isinstance(problem, MpQpRawProblem):
        out = {"version": FORMAT_VERSION, "H": _mat(problem.H), "g": _mat(problem.g),
               "G": _mat(problem.G), "b": _vec(problem.b), "E": _mat(problem.E),
               "theta": {"A": _mat(problem.theta.A), "b": _vec(problem.theta.b)}}
        return out
    out = {"version": FORMAT_VERSION, "H": _mat(problem.H), "G": _mat(problem.G),
           "b": _vec(problem.b), "S": _mat(problem.S),
           "theta": {"A": _mat(problem.theta.A), "b": _vec(problem.theta.b)}}
    if problem.back_shift is not None:
        out["back_shift"] = _mat(problem.back_shift)
    if problem.manifest:
        out["manifest"] = problem.manifest
    return out


def problem_from_dict(data, check_bounded=True):
    if "version" not in data:
        raise ValueError("problem file lacks a version field")
    theta = ParamDomain(np.array(data["theta"]["A"], dtype=float),
                        np.array(data["theta"]["b"], dtype=float))
    if check_bounded and not theta.is_bounded():
        raise ValueError("parameter domain is unbounded")
    if "S" in data:
        return MpQpProblem(
            np.array(data["H"], dtype=float), np.array(data["G"], dtype=float),
            np.array(data["b"], dtype=float), np.array(data["S"], dtype=float),
            theta,
            back_shift=None if "back_shift" not in data
            else np.array(data["back_shift"], dtype=float),
            manifest=data.get("manifest"))
    return MpQpRawProblem(
        np.array(data["H"], dtype=float), np.array(data["g"], dtype=float),
        np.array(data["G"], dtype=float), np.array(data["b"], dtype=float),
        np.array(data["E"], dtype=float), theta)


def save_problem(problem, path):
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh)


def load_problem(path):
    with open(path) as fh:
        return problem_from_dict(json.load(fh))


def problem_hash(problem):
    """sha256 over the canonical standard-form JSON (manifest excluded)."""
    data = problem_to_dict(problem)
    data.pop("manifest", None)
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).digest()


def solution_to_dict(sol):
    return {
        "version": FORMAT_VERSION,
        "problem": problem_to_dict(sol.problem),
        "problem_hash": problem_hash(sol.problem).hex(),
        "regions": [
            {"active_set": [n + 1 for n in rs.active_set],
             "k": _vec(rs.k), "K": _mat(rs.K),
             "q": _vec(rs.q), "Q": _mat(rs.Q) if rs.q.size else [],
             "e_primal": [n + 1 for n in rs.e_primal],
             "e_dual": [n + 1 for n in rs.e_dual]}
            for rs in sol.regions
        ],
    }


def solution_from_dict(data):
    problem = problem_from_dict(data["problem"])
    regions = []
    np_ = problem.np_
    for reg in data["regions"]:
        active = tuple(n - 1 for n in reg["active_set"])
        Q = np.array(reg["Q"], dtype=float).reshape(len(active), np_) \
            if active else np.zeros((0, np_))
        regions.append(RegionSolution(
            active, np.array(reg["k"], dtype=float), np.array(reg["K"], dtype=float),
            np.array(reg["q"], dtype=float), Q,
            tuple(n - 1 for n in reg["e_primal"]),
            tuple(n - 1 for n in reg["e_dual"])))
    sol = ExplicitSolution(problem, regions)
    stored = data.get("problem_hash")
    if stored and stored != problem_hash(problem).hex():
        raise HashMismatch("solution file hash does not match its problem data")
    return sol


def save_solution(sol, path):
    with open(path, "w") as fh:
        json.dump(solution_to_dict(sol), fh)


def load_solution(path):
    with open(path) as fh:
        return solution_from_dict(json.load(fh))


class _Writer:
    def __init__(self):
        self.parts = []

    def u32(self, *vals):
        self.parts.append(struct.pack(f"<{len(vals)}I", *vals))

    def i32(self, *vals):
        self.parts.append(struct.pack(f"<{len(vals)}i", *vals))

    def f64(self, arr):
        arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8")).reshape(-1)
        self.parts.append(arr.tobytes())

    def raw(self, b):
        self.parts.append(b)

    def getvalue(self):
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.off = 0

    def u32(self, n=1):
        vals = struct.unpack_from(f"<{n}I", self.buf, self.off)
        self.off += 4 * n
        return vals[0] if n == 1 else vals

    def i32(self, n=1):
        vals = struct.unpack_from(f"<{n}i", self.buf, self.off)
        self.off += 4 * n
        return vals[0] if n == 1 else vals

    def f64(self, n):
        arr = np.frombuffer(self.buf, dtype="<f8", count=n, offset=self.off).copy()
        self.off += 8 * n
        return arr

    def raw(self, n):
        out = self.buf[self.off:self.off + n]
        self.off += n
        return out


def _normalized_payload(upd, nz):
    """Fold the largest f component into the scalars and sparse values."""
    pivot = int(np.argmax(np.abs(upd.f)))
    fp = float(upd.f[pivot])
    f_rest = np.delete(upd.f, pivot) / fp
    c = upd.c * fp
    v = upd.v * fp
    fe = {n: val / fp for n, val in upd.f_entries.items()}
    de = {n: val / fp for n, val in upd.d_entries.items()}
    return pivot, f_rest, c, v, fe, de


def tree_records(tree):
    """Node records in BFS order, payloads encoded per the file mode."""
    from . import tree as treemod

    problem = tree.problem
    order = tree.bfs_order()
    pos = {idx: bfs for bfs, idx in enumerate(order)}
    nz_store = tree.n_u if tree.mpc_mode else problem.nz
    records = []
    for idx in order:
        node = tree.nodes[idx]
        rec = {
            "region": node.region_id,
            "parent": -1 if node.parent is None else pos[node.parent],
            "e_primal": node.e_primal, "e_dual": node.e_dual,
            "s_primal": node.s_primal, "s_dual": node.s_dual,
        }
        if node.parent is None:
            data = tree.root_data[idx]
            rec["root"] = {
                "k": data.k[:nz_store], "K": data.K[:nz_store],
                "b_rows": data.sp_rows_b, "A_rows": data.sp_rows_A,
                "sd_stored": data.sd_stored,
                "q_rows": data.sd_rows_q, "Q_rows": data.sd_rows_Q,
            }
        else:
            pays = []
            for upd in node.chain:
                kind = 0 if upd.edge_kind == "add" else 1
                if tree.mpc_mode:
                    fe = dict(upd.f_entries)
                    de = dict(upd.d_entries)
                    pays.append({"kind": kind, "constraint": upd.constraint,
                                 "c": upd.c, "v": upd.v, "f": upd.f[:nz_store],
                                 "pivot": -1, "fe": fe, "de": de})
                else:
                    pivot, f_rest, c, v, fe, de = _normalized_payload(upd, problem.nz)
                    pays.append({"kind": kind, "constraint": upd.constraint,
                                 "c": c, "v": v, "f": f_rest,
                                 "pivot": pivot, "fe": fe, "de": de})
            rec["payloads"] = pays
        records.append(rec)
    return records


def save_tree(tree, path):
    from . import tree as treemod

    problem = tree.problem
    nz_store = tree.n_u if tree.mpc_mode else problem.nz
    w = _Writer()
    w.raw(MAGIC)
    w.u32(FORMAT_VERSION, problem.nz, problem.np_, problem.nc, tree.n_nodes,
          len(tree.roots), 1 if tree.mpc_mode else 0, tree.n_u)
    w.raw(problem_hash(problem))
    mt = problem.theta.A.shape[0]
    w.u32(mt)
    w.f64(problem.theta.A)
    w.f64(problem.theta.b)
    records = tree_records(tree)
    w.u32(len(records))
    for rec in records:
        w.u32(rec["region"] + 1)
        w.i32(rec["parent"])
        for key in ("e_primal", "e_dual", "s_primal", "s_dual"):
            w.u32(len(rec[key]), *(n + 1 for n in rec[key]))
        if "root" in rec:
            w.u32(1)
            root = rec["root"]
            w.f64(root["k"])
            w.f64(root["K"])
            w.f64(root["b_rows"])
            w.f64(root["A_rows"])
            w.u32(len(root["sd_stored"]), *(n + 1 for n in root["sd_stored"]))
            w.f64(root["q_rows"])
            w.f64(root["Q_rows"])
        else:
            w.u32(0)
            w.u32(len(rec["payloads"]))
            for pay in rec["payloads"]:
                w.u32(pay["kind"], pay["constraint"] + 1)
                w.i32(pay["pivot"])
                w.f64([pay["c"]])
                w.f64(pay["v"])
                w.f64(pay["f"])
                fe_idx = sorted(pay["fe"])
                w.u32(len(fe_idx), *(n + 1 for n in fe_idx))
                w.f64([pay["fe"][n] for n in fe_idx])
                de_idx = sorted(pay["de"])
                w.u32(len(de_idx), *(n + 1 for n in de_idx))
                w.f64([pay["de"][n] for n in de_idx])
    with open(path, "wb") as fh:
        fh.write(w.getvalue())


def load_tree(path):
    """Read a tree file into a FlatTree plus a header dict."""
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    if r.raw(8) != MAGIC:
        raise ValueError("not a tree file (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported tree format version {version}")
    nz, np_, nc, n_nodes_hdr, n_roots, mpc_mode, n_u = r.u32(7)
    phash = r.raw(32)
    mt = r.u32()
    theta_A = r.f64(mt * np_).reshape(mt, np_)
    theta_b = r.f64(mt)
    n_nodes = r.u32()

    flat = FlatTree()
    flat.nz_store = n_u if mpc_mode else nz
    flat.np_ = np_
    flat.nc = nc
    flat.n_u = n_u
    flat.mpc_mode = bool(mpc_mode)
    flat.problem_hash = phash
    flat.theta_A = np.ascontiguousarray(theta_A)
    flat.theta_b = np.ascontiguousarray(theta_b)

    node_region, node_parent = [], []
    ep, ed, sp, sd = [], [], [], []
    pay_meta = []   # (c, v, f_full, fe dict, de dict, kind, constraint)
    node_pay = []
    roots = []
    root_rows = []

    for i in range(n_nodes):
        node_region.append(r.u32() - 1)
        node_parent.append(r.i32())
        sets = []
        for _ in range(4):
            cnt = r.u32()
            vals = tuple(v - 1 for v in (r.u32(cnt) if cnt > 1 else
                                         ((r.u32(),) if cnt == 1 else ())))
            sets.append(vals)
        ep.append(sets[0])
        ed.append(sets[1])
        sp.append(sets[2])
        sd.append(sets[3])
        is_root = r.u32()
        if is_root:
            k = r.f64(flat.nz_store)
            K = r.f64(flat.nz_store * np_).reshape(flat.nz_store, np_)
            b_rows = r.f64(len(sets[2]))
            A_rows = r.f64(len(sets[2]) * np_).reshape(len(sets[2]), np_)
            cnt = r.u32()
            sd_stored = tuple(v - 1 for v in (r.u32(cnt) if cnt > 1 else
                                              ((r.u32(),) if cnt == 1 else ())))
            q_rows = r.f64(len(sd_stored))
            Q_rows = r.f64(len(sd_stored) * np_).reshape(len(sd_stored), np_)
            roots.append(i)
            root_rows.append((k, K, sets[2], b_rows, A_rows, sd_stored, q_rows, Q_rows))
            node_pay.append([])
        else:
            n_pay = r.u32()
            ids = []
            for _ in range(n_pay):
                kind, cons = r.u32(2)
                pivot = r.i32()
                c = float(r.f64(1)[0])
                v = r.f64(np_)
                if pivot < 0:
                    f = r.f64(flat.nz_store)
                else:
                    rest = r.f64(flat.nz_store - 1)
                    f = np.insert(rest, pivot, 1.0)
                cnt = r.u32()
                fe_idx = [r.u32() - 1 for _ in range(cnt)]
                fe_val = r.f64(cnt)
                cnt = r.u32()
                de_idx = [r.u32() - 1 for _ in range(cnt)]
                de_val = r.f64(cnt)
                ids.append(len(pay_meta))
                pay_meta.append((c, v, f, dict(zip(fe_idx, fe_val)),
                                 dict(zip(de_idx, de_val)), kind, cons - 1))
            node_pay.append(ids)

    from ._flat import _csr

    flat.node_region = np.array(node_region, dtype=np.int32)
    flat.node_parent = np.array(node_parent, dtype=np.int32)
    root_of = {}
    node_root = []
    for i in range(n_nodes):
        j = i
        while node_parent[j] >= 0:
            j = node_parent[j]
        if j not in root_of:
            root_of[j] = len(root_of)
        node_root.append(root_of[j])
    flat.node_root = np.array(node_root, dtype=np.int32)

    P = len(pay_meta)
    flat.pay_c = np.array([m[0] for m in pay_meta], dtype=float)
    flat.pay_v = np.vstack([m[1] for m in pay_meta]) if P else np.zeros((0, np_))
    flat.pay_f = np.vstack([m[2] for m in pay_meta]) if P else np.zeros((0, flat.nz_store))
    flat.pay_kind = np.array([m[5] for m in pay_meta], dtype=np.int32)
    flat.pay_constraint = np.array([m[6] for m in pay_meta], dtype=np.int32)
    flat.fe_ptr, flat.fe_idx, flat.fe_val = _csr(
        [sorted(m[3]) for m in pay_meta],
        val_lists=[[m[3][n] for n in sorted(m[3])] for m in pay_meta])
    flat.de_ptr, flat.de_idx, flat.de_val = _csr(
        [sorted(m[4]) for m in pay_meta],
        val_lists=[[m[4][n] for n in sorted(m[4])] for m in pay_meta])

    paths = []
    for i in range(n_nodes):
        chain = []
        j = i
        while node_parent[j] >= 0:
            chain = node_pay[j] + chain
            j = node_parent[j]
        paths.append(chain)
    flat.path_ptr, flat.path_pay = _csr(paths)
    flat.ep_ptr, flat.ep_idx = _csr(ep)
    flat.ed_ptr, flat.ed_idx = _csr(ed)
    flat.sp_ptr, flat.sp_idx = _csr(sp)
    flat.sd_ptr, flat.sd_idx = _csr(sd)

    nroots = len(roots)
    flat.root_k = np.zeros((nroots, flat.nz_store))
    flat.root_K = np.zeros((nroots, flat.nz_store, np_))
    flat.root_prow = -np.ones((nroots, nc), dtype=np.int32)
    flat.root_drow = -np.ones((nroots, nc), dtype=np.int32)
    pb, pA, dq, dQ = [], [], [], []
    for ridx, (k, K, sp_idx, b_rows, A_rows, sd_stored, q_rows, Q_rows) \
            in enumerate(root_rows):
        flat.root_k[ridx] = k
        flat.root_K[ridx] = K
        for local, n in enumerate(sp_idx):
            flat.root_prow[ridx, n] = len(pb) + local
        pb.extend(b_rows)
        pA.extend(A_rows)
        for local, n in enumerate(sd_stored):
            flat.root_drow[ridx, n] = len(dq) + local
        dq.extend(q_rows)
        dQ.extend(Q_rows)
    flat.root_pb = np.asarray(pb, dtype=float)
    flat.root_pA = np.vstack(pA) if pA else np.zeros((0, np_))
    flat.root_dq = np.asarray(dq, dtype=float)
    flat.root_dQ = np.vstack(dQ) if dQ else np.zeros((0, np_))

    header = {"version": version, "nz": nz, "np": np_, "nc": nc,
              "n_nodes": n_nodes, "n_roots": n_roots,
              "mpc_mode": bool(mpc_mode), "n_u": n_u,
              "problem_hash": phash.hex()}
    return flat, header


def count_tree_file_reals(path):
    """Independent pass over a tree file counting stored f64 payload values.

    Domain rows are problem data and excluded; index sets and pivots are
    structural metadata.  Must equal tree.memory_lowrank exactly.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    assert r.raw(8) == MAGIC
    r.u32()
    nz, np_, nc, _, _, mpc_mode, n_u = r.u32(7)
    r.raw(32)
    mt = r.u32()
    r.f64(mt * np_ + mt)
    nz_store = n_u if mpc_mode else nz
    count = 0
    n_nodes = r.u32()
    for _ in range(n_nodes):
        r.u32()
        r.i32()
        set_sizes = []
        for _ in range(4):
            cnt = r.u32()
            if cnt:
                r.u32(cnt) if cnt > 1 else r.u32()
            set_sizes.append(cnt)
        is_root = r.u32()
        if is_root:
            count += len(r.f64(nz_store))
            count += len(r.f64(nz_store * np_))
            count += len(r.f64(set_sizes[2]))
            count += len(r.f64(set_sizes[2] * np_))
            cnt = r.u32()
            if cnt:
                r.u32(cnt) if cnt > 1 else r.u32()
            count += len(r.f64(cnt))
            count += len(r.f64(cnt * np_))
        else:
            n_pay = r.u32()
            for _ in range(n_pay):
                r.u32(2)
                pivot = r.i32()
                count += len(r.f64(1))
                count += len(r.f64(np_))
                count += len(r.f64(nz_store if pivot < 0 else nz_store - 1))
                cnt = r.u32()
                if cnt:
                    r.u32(cnt) if cnt > 1 else r.u32()
                count += len(r.f64(cnt))
                cnt = r.u32()
                if cnt:
                    r.u32(cnt) if cnt > 1 else r.u32()
                count += len(r.f64(cnt))
    return count


def save_tree_json(tree, path):
    """Human-readable twin of the binary format (debugging aid)."""
    problem = tree.problem
    records = tree_records(tree)
    out = {
        "version": FORMAT_VERSION, "nz": problem.nz, "np": problem.np_,
        "nc": problem.nc, "n_roots": len(tree.roots),
        "mpc_mode": tree.mpc_mode, "n_u": tree.n_u,
        "problem_hash": problem_hash(problem).hex(),
        "theta": {"A": _mat(problem.theta.A), "b": _vec(problem.theta.b)},
        "nodes": [],
    }
    for rec in records:
        node = {
            "region": rec["region"] + 1,
            "parent": rec["parent"],
            "e_primal": [n + 1 for n in rec["e_primal"]],
            "e_dual": [n + 1 for n in rec["e_dual"]],
            "s_primal": [n + 1 for n in rec["s_primal"]],
            "s_dual": [n + 1 for n in rec["s_dual"]],
        }
        if "root" in rec:
            root = rec["root"]
            node["root"] = {
                "k": _vec(root["k"]), "K": _mat(root["K"]),
                "b_rows": _vec(root["b_rows"]), "A_rows": _mat(root["A_rows"]),
                "sd_stored": [n + 1 for n in root["sd_stored"]],
                "q_rows": _vec(root["q_rows"]), "Q_rows": _mat(root["Q_rows"]),
            }
        else:
            node["payloads"] = [
                {"kind": "add" if p["kind"] == 0 else "remove",
                 "constraint": p["constraint"] + 1, "pivot": p["pivot"],
                 "c": float(p["c"]), "v": _vec(p["v"]), "f": _vec(p["f"]),
                 "fe": {str(n + 1): float(val) for n, val in sorted(p["fe"].items())},
                 "de": {str(n + 1): float(val) for n, val in sorted(p["de"].items())}}
                for p in rec["payloads"]
            ]
        out["nodes"].append(node)
    with open(path, "w") as fh:
        json.dump(out, fh)
