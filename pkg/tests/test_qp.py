import numpy as np
import pytest

from mpqptree import qp
from mpqptree.problem import MpQpProblem, ParamDomain

from oracles import solve_qp_brute, random_spd


def scalar_problem():
    # min 1/2 * 2 z^2  s.t.  z <= -1 + p,  p in [-2, 2]
    theta = ParamDomain.box([-2.0], [2.0])
    return MpQpProblem([[2.0]], [[1.0]], [-1.0], [[1.0]], theta)


def random_problem(rng, nz, nc, np_):
    H = random_spd(rng, nz)
    G = rng.standard_normal((nc, nz))
    b = rng.uniform(0.2, 1.5, nc)
    S = rng.standard_normal((nc, np_))
    theta = ParamDomain.box(-np.ones(np_), np.ones(np_))
    return MpQpProblem(H, G, b, S, theta)


def test_interior_optimum():
    rng = np.random.default_rng(0)
    prob = random_problem(rng, 3, 6, 2)
    res = qp.solve_qp(prob, np.zeros(2))  # b > 0 ensures z = 0 feasible
    assert res.status == qp.OPTIMAL
    assert np.allclose(res.z, 0.0, atol=1e-10)
    assert res.active == ()


def test_scalar_fixture():
    # At p = 0 the constraint z <= -1 is active: z = -1, lambda = 2.
    res = qp.solve_qp(scalar_problem(), np.zeros(1))
    assert res.status == qp.OPTIMAL
    assert res.z[0] == pytest.approx(-1.0, abs=1e-10)
    assert res.lam[0] == pytest.approx(2.0, abs=1e-10)
    assert res.active == (0,)


def test_infeasible_parameter():
    # z <= -1 + p and z >= 1 + p cannot hold together.
    theta = ParamDomain.box([-1.0], [1.0])
    prob = MpQpProblem([[1.0]], [[1.0], [-1.0]], [-1.0, -1.0], [[1.0], [-1.0]], theta)
    res = qp.solve_qp(prob, np.zeros(1))
    assert res.status == qp.INFEASIBLE


def test_matches_brute_force_enumeration():
    rng = np.random.default_rng(7)
    for trial in range(40):
        nz = int(rng.integers(2, 7))
        nc = int(rng.integers(3, 13))
        prob = random_problem(rng, nz, nc, 2)
        p = rng.uniform(-1.0, 1.0, 2)
        res = qp.solve_qp(prob, p)
        rhs = prob.b + prob.S @ p
        z_ref, lam_ref = solve_qp_brute(prob.H, prob.G, rhs)
        if z_ref is None:
            assert res.status == qp.INFEASIBLE
            continue
        assert res.status == qp.OPTIMAL
        assert np.max(np.abs(res.z - z_ref)) < 1e-8, f"trial {trial}"
        assert np.max(np.abs(res.lam - lam_ref)) < 1e-7, f"trial {trial}"


def test_zero_rows_handled():
    # A parameter-only row (zero z coefficients) never enters the active set.
    theta = ParamDomain.box([-2.0], [2.0])
    prob = MpQpProblem([[1.0]], [[1.0], [0.0]], [1.0, 1.0], [[0.0], [1.0]], theta)
    res = qp.solve_qp(prob, np.array([-0.5]))
    assert res.status == qp.OPTIMAL
    assert res.active == ()
    res = qp.solve_qp(prob, np.array([-1.5]))  # 0 <= 1 + p violated
    assert res.status == qp.INFEASIBLE


def test_recover_active_set_multiplier_rule():
    prob = scalar_problem()
    assert qp.recover_active_set(prob, np.array([0.0])) == (0,)
    assert qp.recover_active_set(prob, np.array([1.5])) == ()
    from mpqptree.errors import InfeasibleParameter
    theta = ParamDomain.box([-1.0], [1.0])
    infeas = MpQpProblem([[1.0]], [[1.0], [-1.0]], [-1.0, -1.0], [[1.0], [-1.0]], theta)
    with pytest.raises(InfeasibleParameter):
        qp.recover_active_set(infeas, np.zeros(1))
