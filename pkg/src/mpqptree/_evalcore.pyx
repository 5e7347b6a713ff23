# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernels over a FlatTree.

Same contract as mpqptree._evalcore_py; the batch point-location loop is
the reason this extension exists.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


cdef double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


cdef double _sparse_get(const int[::1] idx, const double[::1] val,
                        Py_ssize_t lo, Py_ssize_t hi, int n) noexcept nogil:
    cdef Py_ssize_t mid, end = hi
    while lo < hi:
        mid = (lo + hi) >> 1
        if idx[mid] < n:
            lo = mid + 1
        else:
            hi = mid
    if lo < end and idx[lo] == n:
        return val[lo]
    return 0.0


cdef class _View:
    """Typed views of the FlatTree and optional scratch arrays."""
    cdef public Py_ssize_t n_nodes, n_payloads, nz_store, np_
    cdef int[::1] node_region, node_parent, node_root
    cdef long long[::1] path_ptr
    cdef int[::1] path_pay
    cdef long long[::1] ep_ptr, ed_ptr
    cdef int[::1] ep_idx, ed_idx
    cdef double[::1] pay_c
    cdef double[:, ::1] pay_v, pay_f
    cdef long long[::1] fe_ptr, de_ptr
    cdef int[::1] fe_idx, de_idx
    cdef double[::1] fe_val, de_val
    cdef double[:, ::1] root_k, root_pA, root_dQ
    cdef double[:, :, ::1] root_K
    cdef int[:, ::1] root_prow, root_drow
    cdef double[::1] root_pb, root_dq
    cdef double[:, ::1] theta_A
    cdef double[::1] theta_b
    # scratch (may be empty when unused)
    cdef bint has_scratch
    cdef double[::1] s_scalar, s_rp, s_rd
    cdef unsigned char[::1] v_scalar, v_rp, v_rd

    def __init__(self, flat, scratch):
        self.n_nodes = len(flat.node_region)
        self.n_payloads = len(flat.pay_c)
        self.nz_store = flat.nz_store
        self.np_ = flat.np_
        self.node_region = flat.node_region
        self.node_parent = flat.node_parent
        self.node_root = flat.node_root
        self.path_ptr = flat.path_ptr
        self.path_pay = flat.path_pay
        self.ep_ptr = flat.ep_ptr
        self.ep_idx = flat.ep_idx
        self.ed_ptr = flat.ed_ptr
        self.ed_idx = flat.ed_idx
        self.pay_c = flat.pay_c
        self.pay_v = flat.pay_v
        self.pay_f = flat.pay_f
        self.fe_ptr = flat.fe_ptr
        self.fe_idx = flat.fe_idx
        self.fe_val = flat.fe_val
        self.de_ptr = flat.de_ptr
        self.de_idx = flat.de_idx
        self.de_val = flat.de_val
        self.root_k = flat.root_k
        self.root_K = flat.root_K
        self.root_prow = flat.root_prow
        self.root_drow = flat.root_drow
        self.root_pb = flat.root_pb
        self.root_pA = flat.root_pA
        self.root_dq = flat.root_dq
        self.root_dQ = flat.root_dQ
        self.theta_A = flat.theta_A
        self.theta_b = flat.theta_b
        self.has_scratch = scratch is not None
        if self.has_scratch:
            self.s_scalar = scratch.scalar_cache
            self.v_scalar = scratch.scalar_valid
            self.s_rp = scratch.rp_cache
            self.v_rp = scratch.rp_valid
            self.s_rd = scratch.rd_cache
            self.v_rd = scratch.rd_valid

    cdef double scalar(self, Py_ssize_t pay, const double[::1] p) noexcept nogil:
        cdef double val
        if self.has_scratch:
            if self.v_scalar[pay]:
                return self.s_scalar[pay]
            val = self.pay_c[pay] + _dot(self.pay_v[pay], p)
            self.s_scalar[pay] = val
            self.v_scalar[pay] = 1
            return val
        return self.pay_c[pay] + _dot(self.pay_v[pay], p)

    cdef double root_primal(self, Py_ssize_t pos, const double[::1] p) noexcept nogil:
        cdef double val
        if self.has_scratch:
            if self.v_rp[pos]:
                return self.s_rp[pos]
            val = self.root_pb[pos] + _dot(self.root_pA[pos], p)
            self.s_rp[pos] = val
            self.v_rp[pos] = 1
            return val
        return self.root_pb[pos] + _dot(self.root_pA[pos], p)

    cdef double root_dual(self, Py_ssize_t pos, const double[::1] p) noexcept nogil:
        cdef double val
        if self.has_scratch:
            if self.v_rd[pos]:
                return self.s_rd[pos]
            val = -self.root_dq[pos] - _dot(self.root_dQ[pos], p)
            self.s_rd[pos] = val
            self.v_rd[pos] = 1
            return val
        return -self.root_dq[pos] - _dot(self.root_dQ[pos], p)

    cdef void solution(self, Py_ssize_t node, const double[::1] p,
                       double[::1] out) noexcept nogil:
        cdef Py_ssize_t root = self.node_root[node]
        cdef Py_ssize_t i, t, pay
        cdef double s
        for i in range(self.nz_store):
            out[i] = self.root_k[root, i] + _dot(self.root_K[root, i], p)
        for t in range(self.path_ptr[node], self.path_ptr[node + 1]):
            pay = self.path_pay[t]
            s = self.scalar(pay, p)
            for i in range(self.nz_store):
                out[i] += self.pay_f[pay, i] * s

    cdef double hyperplane(self, Py_ssize_t node, int n, const double[::1] p,
                           bint primal) noexcept nogil:
        cdef Py_ssize_t root = self.node_root[node]
        cdef Py_ssize_t t, pay
        cdef int pos
        cdef double s, coef
        if primal:
            pos = self.root_prow[root, n]
            s = self.root_primal(pos, p) if pos >= 0 else 0.0
            for t in range(self.path_ptr[node], self.path_ptr[node + 1]):
                pay = self.path_pay[t]
                coef = _sparse_get(self.fe_idx, self.fe_val,
                                   self.fe_ptr[pay], self.fe_ptr[pay + 1], n)
                if coef != 0.0:
                    s += coef * self.scalar(pay, p)
            return s
        pos = self.root_drow[root, n]
        s = self.root_dual(pos, p) if pos >= 0 else 0.0
        for t in range(self.path_ptr[node], self.path_ptr[node + 1]):
            pay = self.path_pay[t]
            coef = _sparse_get(self.de_idx, self.de_val,
                               self.de_ptr[pay], self.de_ptr[pay + 1], n)
            if coef != 0.0:
                s += coef * self.scalar(pay, p)
        return s

    cdef bint matches(self, Py_ssize_t node, const double[::1] p,
                      double tol) noexcept nogil:
        cdef Py_ssize_t t
        for t in range(self.ep_ptr[node], self.ep_ptr[node + 1]):
            if self.hyperplane(node, self.ep_idx[t], p, True) > tol:
                return False
        for t in range(self.ed_ptr[node], self.ed_ptr[node + 1]):
            if self.hyperplane(node, self.ed_idx[t], p, False) > tol:
                return False
        return True

    cdef Py_ssize_t locate_one(self, const double[::1] p, double tol) noexcept nogil:
        cdef Py_ssize_t i, node
        cdef double lhs
        for i in range(self.theta_A.shape[0]):
            lhs = _dot(self.theta_A[i], p)
            if lhs > self.theta_b[i] + tol:
                return -1
        for node in range(self.n_nodes):
            if self.matches(node, p, tol):
                return node
        return -1


def eval_solution(flat, Py_ssize_t node, cnp.ndarray p, scratch=None):
    cdef _View view = _View(flat, scratch)
    out = np.empty(flat.nz_store)
    cdef double[::1] out_view = out
    cdef double[::1] p_view = np.ascontiguousarray(p, dtype=np.float64)
    view.solution(node, p_view, out_view)
    return out


def eval_hyperplane(flat, Py_ssize_t node, int n, cnp.ndarray p, bint primal,
                    scratch=None):
    cdef _View view = _View(flat, scratch)
    cdef double[::1] p_view = np.ascontiguousarray(p, dtype=np.float64)
    return view.hyperplane(node, n, p_view, primal)


def locate(flat, cnp.ndarray p, double tol, scratch=None):
    cdef _View view = _View(flat, scratch)
    cdef double[::1] p_view = np.ascontiguousarray(p, dtype=np.float64)
    return view.locate_one(p_view, tol)


def locate_eval_batch(flat, cnp.ndarray points, double tol):
    from .evaluator import EvalScratch
    scratch = EvalScratch(flat)
    cdef _View view = _View(flat, scratch)
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t npts = pts.shape[0]
    nodes = np.empty(npts, dtype=np.int64)
    Z = np.full((npts, flat.nz_store), np.nan)
    cdef long long[::1] nodes_view = nodes
    cdef double[:, ::1] Z_view = Z
    cdef Py_ssize_t i, node
    for i in range(npts):
        if view.has_scratch:
            view.v_scalar[:] = 0
            view.v_rp[:] = 0
            view.v_rd[:] = 0
        node = view.locate_one(pts[i], tol)
        nodes_view[i] = node
        if node >= 0:
            view.solution(node, pts[i], Z_view[i])
    return nodes, Z
