import numpy as np
import pytest

from mpqptree import enumeration, evaluator, mpc, qp, tree as treemod
from mpqptree.errors import HyperplaneNotStored, UnknownNode
from mpqptree.problem import transform_to_standard

from fixtures import sample_in_ball, scalar_instance


def pipeline(build, n_u=1, mpc_mode=False):
    raw, manifest = mpc.condense(build())
    std = transform_to_standard(raw)
    red, _ = enumeration.remove_redundant_constraints(std)
    sol, geo = enumeration.enumerate_regions(red)
    tree = treemod.build_tree(sol, mpc_mode=mpc_mode, n_u=manifest["n_u"])
    return red, sol, geo, tree


@pytest.fixture(scope="module")
def p2_setup():
    return pipeline(lambda: mpc.build_problem23(2, 2))


@pytest.fixture(scope="module")
def scalar_setup():
    prob = scalar_instance()
    sol, geo = enumeration.enumerate_regions(prob)
    tree = treemod.build_tree(sol)
    return prob, sol, geo, tree


class TestEvalSolution:
    def test_root_returns_root_law(self, scalar_setup):
        prob, sol, geo, tree = scalar_setup
        flat = evaluator.as_flat(tree)
        root_node = 0
        rs = sol.regions[flat.node_region[root_node]]
        p = np.array([1.5])
        assert np.allclose(evaluator.eval_solution(tree, root_node, p), rs.zopt(p))
        assert np.allclose(evaluator.eval_solution(tree, root_node, np.zeros(1)), rs.k)

    def test_scalar_two_node_chain(self, scalar_setup):
        prob, sol, geo, tree = scalar_setup
        node = evaluator.node_for_region(tree, 1)  # region of active set {0}
        z = evaluator.eval_solution(tree, node, np.zeros(1))
        assert z[0] == pytest.approx(-1.0, abs=1e-12)

    def test_matches_uncompressed_and_oracle(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        rng = np.random.default_rng(0)
        for region_id, rs in enumerate(sol.regions):
            node = evaluator.node_for_region(tree, region_id)
            region = geo[rs.active_set]
            for p in sample_in_ball(region.center, region.radius, rng, 100):
                z_tree = evaluator.eval_solution(tree, node, p)
                z_flat = evaluator.eval_uncompressed(sol, region_id, p)
                assert np.max(np.abs(z_tree - z_flat)) < 1e-9
            pbar = region.center
            res = qp.solve_qp(prob, pbar)
            assert np.max(np.abs(evaluator.eval_solution(tree, node, pbar) - res.z)) < 1e-7

    def test_unknown_node(self, scalar_setup):
        _, _, _, tree = scalar_setup
        with pytest.raises(UnknownNode):
            evaluator.eval_solution(tree, 99, np.zeros(1))


class TestEvalHyperplane:
    def test_root_primal_row_at_zero(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        flat = evaluator.as_flat(tree)
        root = 0
        rs = sol.regions[flat.node_region[root]]
        for n in rs.e_primal[:3]:
            val = evaluator.eval_hyperplane(tree, root, n, np.zeros(prob.np_))
            expect = float(prob.G[n] @ rs.k - prob.b[n])
            assert val == pytest.approx(expect, abs=1e-12)

    def test_scalar_dual_sign_convention(self, scalar_setup):
        prob, sol, geo, tree = scalar_setup
        node = evaluator.node_for_region(tree, 1)
        # At p=0 the multiplier is 2, so the stored "<= 0" dual row reads -2.
        val = evaluator.eval_hyperplane(tree, node, 0, np.zeros(1))
        assert val == pytest.approx(-2.0, abs=1e-12)

    def test_matches_uncompressed_residuals_everywhere(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        rng = np.random.default_rng(1)
        for region_id, rs in enumerate(sol.regions):
            node = evaluator.node_for_region(tree, region_id)
            region = geo[rs.active_set]
            pts = sample_in_ball(region.center, region.radius, rng, 100)
            for n in rs.e_primal + rs.e_dual:
                for p in pts[:25]:
                    mine = evaluator.eval_hyperplane(tree, node, n, p)
                    ref = evaluator.uncompressed_row_residual(sol, region_id, n, p)
                    # 1e-9 relative to the row magnitude: some defining rows
                    # of near-degenerate regions reach |value| ~ 1e4.
                    assert abs(mine - ref) < 1e-9 * max(1.0, abs(ref))

    def test_not_stored_raises(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        flat = evaluator.as_flat(tree)
        node = 0
        rs = sol.regions[flat.node_region[node]]
        outside = next(n for n in range(prob.nc)
                       if n not in rs.e_primal and n not in rs.e_dual)
        with pytest.raises(HyperplaneNotStored):
            evaluator.eval_hyperplane(tree, node, outside, np.zeros(prob.np_))


class TestScratch:
    def test_bit_identical_with_and_without(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        flat = evaluator.as_flat(tree)
        rng = np.random.default_rng(2)
        for region_id, rs in enumerate(sol.regions[:10]):
            node = evaluator.node_for_region(tree, region_id)
            region = geo[rs.active_set]
            p = region.center
            scratch = evaluator.EvalScratch(flat)
            plain = evaluator.eval_solution(tree, node, p)
            memo1 = evaluator.eval_solution(tree, node, p, scratch=scratch)
            memo2 = evaluator.eval_solution(tree, node, p, scratch=scratch)
            assert np.array_equal(plain, memo1) and np.array_equal(memo1, memo2)
            for n in (rs.e_primal + rs.e_dual)[:4]:
                v0 = evaluator.eval_hyperplane(tree, node, n, p)
                v1 = evaluator.eval_hyperplane(tree, node, n, p, scratch=scratch)
                v2 = evaluator.eval_hyperplane(tree, node, n, p, scratch=scratch)
                assert v0 == v1 == v2


class TestLocate:
    def test_chebyshev_centers(self, p2_setup):
        # First match may differ from the region id when another region's
        # boundary passes within the membership tolerance (thin slivers of
        # near-degenerate active sets); the returned law must then agree.
        prob, sol, geo, tree = p2_setup
        for region_id, rs in enumerate(sol.regions):
            pbar = geo[rs.active_set].center
            node = evaluator.locate(tree, pbar)
            assert node is not None
            hit = evaluator.node_region(tree, node)
            if hit != region_id:
                z_hit = evaluator.eval_solution(tree, node, pbar)
                z_own = sol.regions[region_id].zopt(pbar)
                assert np.max(np.abs(z_hit - z_own)) < 1e-7

    def test_outside_domain(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        assert evaluator.locate(tree, 100.0 * np.ones(prob.np_)) is None

    def test_infeasible_inside_domain(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        rng = np.random.default_rng(3)
        for _ in range(50):
            p = rng.uniform(-4.0, 4.0, prob.np_)
            node = evaluator.locate(tree, p)
            feasible = qp.solve_qp(prob, p).status == qp.OPTIMAL
            if node is None:
                assert not feasible
            elif feasible:
                res = qp.solve_qp(prob, p)
                z = evaluator.eval_solution(tree, node, p)
                assert np.max(np.abs(z - res.z)) < 1e-7

    def test_law_matches_oracle_on_random_feasible(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 200:
            p = rng.uniform(-4.0, 4.0, prob.np_)
            res = qp.solve_qp(prob, p)
            if res.status != qp.OPTIMAL:
                continue
            node = evaluator.locate(tree, p)
            assert node is not None, p
            z = evaluator.eval_solution(tree, node, p)
            assert np.max(np.abs(z - res.z)) < 1e-7
            checked += 1

    def test_large_sweep_against_oracle(self):
        # 1e4 random parameters on the 4-state lag-chain instance: every
        # feasible point must locate to a region whose law matches the
        # ground-truth QP, every infeasible point must say so.
        prob, sol, geo, tree = pipeline(lambda: mpc.build_problem1(4, 2))
        rng = np.random.default_rng(8)
        pts = rng.uniform(-12.0, 12.0, (10_000, prob.np_))
        nodes, Z = evaluator.locate_eval_batch(tree, pts)
        feasible = nodes >= 0
        for i in np.flatnonzero(feasible)[::7]:
            res = qp.solve_qp(prob, pts[i])
            assert res.status == qp.OPTIMAL
            assert np.max(np.abs(Z[i] - res.z)) < 1e-7
        for i in np.flatnonzero(~feasible)[::23]:
            assert qp.solve_qp(prob, pts[i]).status != qp.OPTIMAL

    def test_batch_matches_single(self, p2_setup):
        prob, sol, geo, tree = p2_setup
        rng = np.random.default_rng(5)
        pts = rng.uniform(-4.0, 4.0, (200, prob.np_))
        nodes, Z = evaluator.locate_eval_batch(tree, pts)
        for i, p in enumerate(pts):
            node = evaluator.locate(tree, p)
            assert (node if node is not None else -1) == nodes[i]
            if node is not None:
                assert np.array_equal(Z[i], evaluator.eval_solution(tree, node, p)) \
                    or np.max(np.abs(Z[i] - evaluator.eval_solution(tree, node, p))) < 1e-12


class TestMpcMode:
    def test_truncated_solution(self):
        prob, sol, geo, tree_full = pipeline(lambda: mpc.build_problem1(2, 2))
        tree_mpc = treemod.build_tree(sol, mpc_mode=True, n_u=1)
        rng = np.random.default_rng(6)
        for region_id, rs in enumerate(sol.regions):
            node_f = evaluator.node_for_region(tree_full, region_id)
            node_m = evaluator.node_for_region(tree_mpc, region_id)
            region = geo[rs.active_set]
            for p in sample_in_ball(region.center, region.radius, rng, 20):
                full = evaluator.eval_solution(tree_full, node_f, p)
                first = evaluator.eval_solution(tree_mpc, node_m, p)
                assert first.shape == (1,)
                assert abs(first[0] - full[0]) < 1e-9

    def test_mpc_membership_unchanged(self):
        prob, sol, geo, tree_full = pipeline(lambda: mpc.build_problem1(2, 2))
        tree_mpc = treemod.build_tree(sol, mpc_mode=True, n_u=1)
        rng = np.random.default_rng(7)
        for _ in range(100):
            p = rng.uniform(-10, 10, prob.np_)
            a = evaluator.locate(tree_full, p)
            b = evaluator.locate(tree_mpc, p)
            ra = None if a is None else evaluator.node_region(tree_full, a)
            rb = None if b is None else evaluator.node_region(tree_mpc, b)
            assert ra == rb
