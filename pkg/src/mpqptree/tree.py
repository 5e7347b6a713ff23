"""Storage tree: arrange all regions as rank-one edits of a root law.

The root node stores the full parametric law and the full rows of its
critical-region description; every other node stores only its edge
payloads (c, v, f and the sparse hyperplane rows) plus index sets.  A
node's stored hyperplane rows are determined by the storage sets

    s_p(i) = union of e_p(j) over j in subtree(i),
    s_d(i) = union of e_d(j) over j in subtree(i),

because evaluating any hyperplane of a descendant walks through this
node's payload.  Structurally-zero payload entries (f~ on the edge's
smaller active set, d~ off the larger active set) are never stored.

Tree construction grows greedily from the root: among all
(unattached, attached) region pairs, the pair with the smallest
active-set symmetric difference is linked next (ties: smallest attached
region id, then smallest unattached id).  Pairs whose payload chain
fails LICQ are skipped; if no pair remains the lowest-id unattached
region becomes an extra root.
"""

import numpy as np

from . import lowrank
from .errors import LicqViolation, MpqpError


class StorageNode:
    def __init__(self, region_id, parent, chain, depth, root_index):
        self.region_id = region_id
        self.parent = parent          # node index or None
        self.children = []
        self.chain = list(chain)      # LowRankUpdate list, empty at root
        self.depth = depth
        self.root_index = root_index  # which tree this node belongs to
        self.e_primal = ()
        self.e_dual = ()
        self.s_primal = ()
        self.s_dual = ()


class RootData:
    """Full data stored at a root: law plus critical-region rows.

    Dual rows are kept only on sd_stored = s_dual intersected with the
    root's active set; everywhere else q~_r is structurally zero and is
    not stored (the evaluator treats missing rows as zero).
    """

    def __init__(self, k, K, sp_rows_b, sp_rows_A, sd_stored, sd_rows_q, sd_rows_Q):
        self.k = k
        self.K = K
        self.sp_rows_b = sp_rows_b  # b~' on s_primal, in index order
        self.sp_rows_A = sp_rows_A  # A~' rows on s_primal
        self.sd_stored = sd_stored  # indices of stored dual rows
        self.sd_rows_q = sd_rows_q  # q~_r on sd_stored
        self.sd_rows_Q = sd_rows_Q  # Q~_r rows on sd_stored


class StorageTree:
    def __init__(self, problem, nodes, roots, mpc_mode=False, n_u=None):
        self.problem = problem
        self.nodes = nodes
        self.roots = roots            # node indices of the roots
        self.mpc_mode = bool(mpc_mode)
        self.n_u = int(n_u) if n_u is not None else problem.nz
        self.root_data = {}

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def depth(self):
        return max(node.depth for node in self.nodes)

    def node_of_region(self, region_id):
        for i, node in enumerate(self.nodes):
            if node.region_id == region_id:
                return i
        raise KeyError(region_id)

    def path_to_root(self, node_index):
        """Node indices from `node_index` up to (excluding) its root."""
        path = []
        i = node_index
        while self.nodes[i].parent is not None:
            path.append(i)
            i = self.nodes[i].parent
        return path

    def bfs_order(self):
        """Roots in creation order, then by depth, then by region id."""
        return sorted(range(self.n_nodes),
                      key=lambda i: (self.nodes[i].root_index,
                                     self.nodes[i].depth,
                                     self.nodes[i].region_id))

    # Relations in terms of region ids, for inspection and tests.
    def parent_region(self, region_id):
        node = self.nodes[self.node_of_region(region_id)]
        return None if node.parent is None else self.nodes[node.parent].region_id

    def children_regions(self, region_id):
        node = self.nodes[self.node_of_region(region_id)]
        return sorted(self.nodes[c].region_id for c in node.children)

    def ancestor_regions(self, region_id):
        """Ancestors from the parent up to and including the root."""
        i = self.node_of_region(region_id)
        out = []
        while self.nodes[i].parent is not None:
            i = self.nodes[i].parent
            out.append(self.nodes[i].region_id)
        return out

    def path_regions(self, region_id):
        """The node plus its non-root ancestors, node first."""
        i = self.node_of_region(region_id)
        return [self.nodes[j].region_id for j in self.path_to_root(i)]


def _symdiff(a, b):
    return len(set(a) ^ set(b))


def build_tree(sol, root_policy="empty", mpc_mode=False, n_u=None):
    """Arrange an explicit solution into a storage tree.

    root_policy: "empty" roots the tree at the empty active set (falling
    back to the first region in canonical order), or an integer region
    id.  Extra roots appear only when no LICQ-valid payload chain links a
    region to the already-built forest.
    """
    problem = sol.problem
    regions = sol.regions
    R = len(regions)
    if R == 0:
        raise MpqpError("cannot build a tree from an empty solution")

    if root_policy == "empty":
        root_region = 0
        for i, rs in enumerate(regions):
            if rs.active_set == ():
                root_region = i
                break
    else:
        root_region = int(root_policy)
        if not 0 <= root_region < R:
            raise MpqpError(f"root region {root_region} out of range")

    nodes = [StorageNode(root_region, None, [], 0, 0)]
    roots = [0]
    node_of = {root_region: 0}
    unattached = set(range(R)) - {root_region}
    dead = set()

    while unattached:
        pairs = sorted(
            (( _symdiff(regions[u].active_set, regions[a].active_set), a, u)
             for u in unattached for a in node_of
             if (u, a) not in dead),
            key=lambda t: (t[0], t[1], t[2]))
        attached_one = False
        for d, a, u in pairs:
            try:
                chain, _ = lowrank.chain_updates(
                    problem, regions[a], regions[u].active_set)
            except LicqViolation:
                dead.add((u, a))
                continue
            parent_node = node_of[a]
            node = StorageNode(u, parent_node, chain,
                               nodes[parent_node].depth + 1,
                               nodes[parent_node].root_index)
            nodes.append(node)
            nodes[parent_node].children.append(len(nodes) - 1)
            node_of[u] = len(nodes) - 1
            unattached.remove(u)
            attached_one = True
            break
        if not attached_one:
            u = min(unattached)
            node = StorageNode(u, None, [], 0, len(roots))
            nodes.append(node)
            roots.append(len(nodes) - 1)
            node_of[u] = len(nodes) - 1
            unattached.remove(u)

    tree = StorageTree(problem, nodes, roots, mpc_mode=mpc_mode, n_u=n_u)
    for node in tree.nodes:
        rs = regions[node.region_id]
        node.e_primal = tuple(rs.e_primal)
        node.e_dual = tuple(rs.e_dual)
    storage_sets(tree)
    _prune_payloads(tree)
    _fill_root_data(tree, sol)
    return tree


def storage_sets(tree):
    """Post-order union of defining-hyperplane sets over each subtree."""
    order = sorted(range(tree.n_nodes), key=lambda i: -tree.nodes[i].depth)
    sp = [set(tree.nodes[i].e_primal) for i in range(tree.n_nodes)]
    sd = [set(tree.nodes[i].e_dual) for i in range(tree.n_nodes)]
    for i in order:
        parent = tree.nodes[i].parent
        if parent is not None:
            sp[parent] |= sp[i]
            sd[parent] |= sd[i]
    for i, node in enumerate(tree.nodes):
        node.s_primal = tuple(sorted(sp[i]))
        node.s_dual = tuple(sorted(sd[i]))
    return {i: (tree.nodes[i].s_primal, tree.nodes[i].s_dual)
            for i in range(tree.n_nodes)}


def _prune_payloads(tree):
    for node in tree.nodes:
        node.chain = [upd.pruned(node.s_primal, node.s_dual)
                      for upd in node.chain]


def _fill_root_data(tree, sol):
    problem = tree.problem
    for r in tree.roots:
        node = tree.nodes[r]
        rs = sol.regions[node.region_id]
        sp = list(node.s_primal)
        active = set(rs.active_set)
        sd_stored = tuple(n for n in node.s_dual if n in active)
        b_rows = problem.G[sp] @ rs.k - problem.b[sp] if sp else np.zeros(0)
        A_rows = (problem.G[sp] @ rs.K - problem.S[sp]
                  if sp else np.zeros((0, problem.np_)))
        pos = [rs.active_set.index(n) for n in sd_stored]
        q_rows = rs.q[pos] if pos else np.zeros(0)
        Q_rows = rs.Q[pos] if pos else np.zeros((0, problem.np_))
        k = rs.k.copy()
        K = rs.K.copy()
        if tree.mpc_mode:
            k = k[:tree.n_u]
            K = K[:tree.n_u]
        tree.root_data[r] = RootData(k, K, b_rows, A_rows, sd_stored, q_rows, Q_rows)


def stored_entry_counts(node):
    """Stored (f~, d~) entry counts per payload of a node's chain."""
    return [(len(upd.f_entries), len(upd.d_entries)) for upd in node.chain]


def memory_full(sol, mpc_mode=False, n_u=None):
    """Reals needed to store the plain region-by-region solution."""
    problem = sol.problem
    np1 = problem.np_ + 1
    nzs = (n_u if n_u is not None else problem.nz) if mpc_mode else problem.nz
    cr = sum((len(rs.e_primal) + len(rs.e_dual)) * np1 for rs in sol.regions)
    return sol.R * nzs * np1 + cr


def memory_full_cr(sol):
    """The critical-region share of memory_full."""
    np1 = sol.problem.np_ + 1
    return sum((len(rs.e_primal) + len(rs.e_dual)) * np1 for rs in sol.regions)


def memory_lowrank(tree, mpc_mode=None):
    """Reals stored by the tree, exactly as serialized.

    Per root: the law (nzs * (np+1)) plus the stored region rows at
    (np+1) each; structurally-zero dual rows of the root are not stored.
    Per payload: the scalar pair (1 + np), the direction, and the
    surviving sparse entries.  In full mode the direction is stored
    normalized (its largest component folded into the scalars), costing
    nz - 1 reals; in mpc mode the first n_u components are stored raw.
    `mpc_mode=None` uses the tree's own mode.
    """
    if mpc_mode is None:
        mpc_mode = tree.mpc_mode
    problem = tree.problem
    np_ = problem.np_
    nzs = tree.n_u if mpc_mode else problem.nz
    f_cost = tree.n_u if mpc_mode else problem.nz - 1
    total = 0
    for r in tree.roots:
        node = tree.nodes[r]
        total += nzs * (np_ + 1)
        total += (len(node.s_primal) + len(tree.root_data[r].sd_stored)) * (np_ + 1)
    for node in tree.nodes:
        for upd in node.chain:
            total += 1 + np_ + f_cost + len(upd.f_entries) + len(upd.d_entries)
    return total


def memory_lowrank_cr(tree):
    """The critical-region share of memory_lowrank (law storage excluded)."""
    np_ = tree.problem.np_
    total = 0
    for r in tree.roots:
        node = tree.nodes[r]
        total += (len(node.s_primal) + len(tree.root_data[r].sd_stored)) * (np_ + 1)
    for node in tree.nodes:
        for upd in node.chain:
            total += 1 + np_ + len(upd.f_entries) + len(upd.d_entries)
    return total


class MemoryReport:
    """One benchmark row: counts and the three compression ratios."""

    def __init__(self, nc, R, delta, r_cr, r, r_mpc, m_full, m_lowrank,
                 m_full_mpc, m_lowrank_mpc, n_roots):
        self.nc = nc
        self.R = R
        self.delta = delta
        self.r_cr = r_cr
        self.r = r
        self.r_mpc = r_mpc
        self.m_full = m_full
        self.m_lowrank = m_lowrank
        self.m_full_mpc = m_full_mpc
        self.m_lowrank_mpc = m_lowrank_mpc
        self.n_roots = n_roots

    def __str__(self):
        return (f"nc={self.nc} R={self.R} delta={self.delta} "
                f"r_cr={self.r_cr:.3f} r={self.r:.3f} r_mpc={self.r_mpc:.3f}")


def compression_report(sol, tree):
    cr_f = memory_full_cr(sol)
    cr_lr = memory_lowrank_cr(tree)
    m_f = memory_full(sol)
    m_lr = memory_lowrank(tree, mpc_mode=False)
    m_f_mpc = memory_full(sol, mpc_mode=True, n_u=tree.n_u)
    m_lr_mpc = memory_lowrank(tree, mpc_mode=True)
    return MemoryReport(
        nc=sol.problem.nc, R=sol.R, delta=tree.depth,
        r_cr=cr_lr / cr_f, r=m_lr / m_f, r_mpc=m_lr_mpc / m_f_mpc,
        m_full=m_f, m_lowrank=m_lr,
        m_full_mpc=m_f_mpc, m_lowrank_mpc=m_lr_mpc,
        n_roots=len(tree.roots))
