import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpqptree import lp
from mpqptree.errors import EmptyPolyhedron

from oracles import enumerate_vertices, lp_min_by_vertices, redundant_by_vertices


def unit_box(d):
    A = np.vstack([np.eye(d), -np.eye(d)])
    b = np.ones(2 * d)
    return lp.Polyhedron(A, b)


def random_bounded_poly(rng, d, m):
    # Random rows around a box so the feasible set stays bounded and solid.
    A = np.vstack([np.eye(d), -np.eye(d), rng.standard_normal((m - 2 * d, d))])
    b = np.concatenate([np.full(2 * d, 2.0), rng.uniform(0.5, 2.5, m - 2 * d)])
    return lp.Polyhedron(A, b)


class TestLpSolve:
    def test_box_minimum(self):
        out = lp.lp_solve(np.array([1.0, 0.0]), unit_box(2))
        assert out.status == lp.OPTIMAL
        assert out.objective == pytest.approx(-1.0, abs=1e-9)
        assert out.x[0] == pytest.approx(-1.0, abs=1e-9)

    def test_unbounded(self):
        poly = lp.Polyhedron(np.array([[1.0]]), np.array([1.0]))
        out = lp.lp_solve(np.array([1.0]), poly)
        assert out.status == lp.UNBOUNDED

    def test_infeasible(self):
        poly = lp.Polyhedron(np.array([[1.0], [-1.0]]), np.array([-2.0, 1.0]))
        out = lp.lp_solve(np.array([1.0]), poly)
        assert out.status == lp.INFEASIBLE

    def test_matches_vertex_enumeration_random(self):
        rng = np.random.default_rng(42)
        for trial in range(25):
            poly = random_bounded_poly(rng, 4, 12)
            c = rng.standard_normal(4)
            out = lp.lp_solve(c, poly)
            ref, _ = lp_min_by_vertices(c, poly.A, poly.b)
            assert out.status == lp.OPTIMAL
            assert out.objective == pytest.approx(ref, abs=1e-8)
            assert np.all(poly.A @ out.x <= poly.b + 1e-8)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        poly = random_bounded_poly(rng, 3, 10)
        c = rng.standard_normal(3)
        first = lp.lp_solve(c, poly)
        second = lp.lp_solve(c, poly)
        assert np.array_equal(first.x, second.x)

    def test_no_constraints(self):
        out = lp.lp_solve(np.zeros(2), lp.Polyhedron(np.zeros((0, 2)), np.zeros(0)))
        assert out.status == lp.OPTIMAL
        out = lp.lp_solve(np.array([1.0, 0.0]), lp.Polyhedron(np.zeros((0, 2)), np.zeros(0)))
        assert out.status == lp.UNBOUNDED

    @settings(deadline=None, max_examples=40)
    @given(st.integers(min_value=0, max_value=2**31 - 1),
           st.integers(min_value=2, max_value=4))
    def test_never_beats_vertices(self, seed, d):
        rng = np.random.default_rng(seed)
        poly = random_bounded_poly(rng, d, 3 * d)
        c = rng.standard_normal(d)
        out = lp.lp_solve(c, poly)
        assert out.status == lp.OPTIMAL
        assert np.all(poly.A @ out.x <= poly.b + 1e-8)
        for v in enumerate_vertices(poly.A, poly.b):
            assert out.objective <= c @ v + 1e-8


class TestChebyshev:
    def test_unit_box(self):
        center, radius = lp.chebyshev_center(unit_box(2))
        assert radius == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(center, 0.0, atol=1e-9)

    def test_degenerate_point(self):
        poly = lp.Polyhedron(np.array([[1.0], [-1.0]]), np.zeros(2))
        _, radius = lp.chebyshev_center(poly)
        assert radius == pytest.approx(0.0, abs=1e-9)

    def test_simplex_radius(self):
        # x >= 0, x1 + x2 <= 1: inscribed ball radius 1/(2 + sqrt(2)).
        poly = lp.Polyhedron(
            np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]),
            np.array([0.0, 0.0, 1.0]),
        )
        _, radius = lp.chebyshev_center(poly)
        assert radius == pytest.approx(1.0 / (2.0 + np.sqrt(2.0)), abs=1e-9)

    def test_empty(self):
        poly = lp.Polyhedron(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))
        center, radius = lp.chebyshev_center(poly)
        assert center is None
        assert radius < 0

    def test_unbounded_radius(self):
        poly = lp.Polyhedron(np.array([[1.0, 0.0]]), np.array([1.0]))
        _, radius = lp.chebyshev_center(poly)
        assert radius == np.inf


class TestRedundancy:
    def test_extra_loose_row(self):
        poly = lp.Polyhedron(
            np.vstack([unit_box(2).A, [[1.0, 0.0]]]),
            np.concatenate([unit_box(2).b, [2.0]]),
        )
        assert lp.is_redundant(poly, 4)

    def test_tight_row(self):
        assert not lp.is_redundant(unit_box(2), 0)

    def test_matches_vertex_oracle(self):
        rng = np.random.default_rng(11)
        for trial in range(15):
            poly = random_bounded_poly(rng, 3, 10)
            for row in range(poly.m):
                assert lp.is_redundant(poly, row) == redundant_by_vertices(
                    poly.A, poly.b, row
                ), f"trial {trial} row {row}"


class TestMinimalRows:
    def test_duplicate_dropped(self):
        box = unit_box(2)
        poly = lp.Polyhedron(np.vstack([box.A, box.A[:1]]), np.concatenate([box.b, box.b[:1]]))
        kept = lp.minimal_rows(poly)
        assert kept == (0, 1, 2, 3)

    def test_scaled_duplicate_dropped(self):
        box = unit_box(2)
        poly = lp.Polyhedron(
            np.vstack([box.A, 2.0 * box.A[:1]]), np.concatenate([box.b, 2.0 * box.b[:1]])
        )
        assert lp.minimal_rows(poly) == (0, 1, 2, 3)

    def test_loose_row_removed(self):
        box = unit_box(2)
        poly = lp.Polyhedron(np.vstack([box.A, [[1.0, 0.0]]]), np.concatenate([box.b, [2.0]]))
        assert lp.minimal_rows(poly) == (0, 1, 2, 3)

    def test_empty_raises(self):
        poly = lp.Polyhedron(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))
        with pytest.raises(EmptyPolyhedron):
            lp.minimal_rows(poly)

    def test_same_set_after_reduction(self):
        rng = np.random.default_rng(5)
        for trial in range(10):
            poly = random_bounded_poly(rng, 3, 12)
            kept = lp.minimal_rows(poly)
            red = lp.Polyhedron(poly.A[list(kept)], poly.b[list(kept)])
            pts = rng.uniform(-3.0, 3.0, size=(10_000, 3))
            inside_full = np.all(pts @ poly.A.T <= poly.b + 1e-9, axis=1)
            inside_red = np.all(pts @ red.A.T <= red.b + 1e-9, axis=1)
            assert np.array_equal(inside_full, inside_red)

    def test_kept_rows_match_vertex_oracle(self):
        rng = np.random.default_rng(17)
        poly = random_bounded_poly(rng, 3, 10)
        kept = lp.minimal_rows(poly)
        for row in range(poly.m):
            keeps = not redundant_by_vertices(poly.A, poly.b, row)
            if keeps:
                assert row in kept
