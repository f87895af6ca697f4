"""LP kernel: statuses, certificates, determinism, weak duality."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capreq.linprog import (GE, LE, EQ, INFEASIBLE, OPTIMAL, UNBOUNDED,
                            LpProblem, MalformedProblem, feasible,
                            make_problem, solve_lp)


def test_single_active_bound():
    out = solve_lp(make_problem([1.0], [[1.0]], [3.0], [GE]))
    assert out.status == OPTIMAL
    assert out.x == pytest.approx([3.0])
    assert out.objective_value == pytest.approx(3.0)


def test_open_ray_unbounded():
    out = solve_lp(make_problem([-1.0], np.zeros((0, 1)), [], [], lower=[0.0]))
    assert out.status == UNBOUNDED
    assert out.ray is not None and out.ray[0] > 0


def test_contradictory_bounds_infeasible():
    out = solve_lp(make_problem([0.0], np.zeros((0, 1)), [], [],
                                lower=[1.0], upper=[0.0]))
    assert out.status == INFEASIBLE


def test_contradictory_rows_infeasible():
    out = solve_lp(make_problem([0.0], [[1.0], [1.0]], [1.0, 0.0], [GE, LE]))
    assert out.status == INFEASIBLE


def test_feasible_true_false():
    assert feasible(make_problem([0.0], np.zeros((0, 1)), [], [], lower=[0.0]))
    assert not feasible(make_problem([0.0], [[1.0], [1.0]], [1.0, 0.0], [GE, LE]))


def test_feasible_random_system_with_interior_point():
    rng = np.random.default_rng(7)
    for _ in range(25):
        a = rng.normal(size=(3, 3))
        x0 = rng.uniform(-2, 2, size=3)
        b = a @ x0 - 1.0  # x0 satisfies every row with slack 1
        assert feasible(make_problem(np.zeros(3), a, b, [GE] * 3))


def test_equality_rows():
    # x + y = 2, x - y = 0 -> x = y = 1, minimize x + 2y
    out = solve_lp(make_problem([1.0, 2.0], [[1, 1], [1, -1]], [2.0, 0.0], [EQ, EQ]))
    assert out.status == OPTIMAL
    assert out.x == pytest.approx([1.0, 1.0])


def test_upper_bounds_respected():
    out = solve_lp(make_problem([-1.0, -1.0], [[1.0, 1.0]], [10.0], [LE],
                                lower=[0.0, 0.0], upper=[3.0, 4.0]))
    assert out.status == OPTIMAL
    assert out.objective_value == pytest.approx(-7.0)


def test_malformed_dimensions():
    with pytest.raises(MalformedProblem):
        make_problem([1.0, 2.0], [[1.0]], [0.0], [GE])
    with pytest.raises(MalformedProblem):
        make_problem([1.0], [[1.0]], [0.0, 1.0], [GE])
    with pytest.raises(MalformedProblem):
        make_problem([1.0], [[np.nan]], [0.0], [GE])
    with pytest.raises(MalformedProblem):
        make_problem([1.0], [[1.0]], [0.0], ["=="])


def _random_canonical(rng):
    """min c @ x, A x >= b, x >= 0 with c >= 0: feasible and bounded."""
    m, n = int(rng.integers(2, 6)), int(rng.integers(2, 6))
    a = rng.normal(size=(m, n))
    x0 = rng.uniform(0.0, 3.0, size=n)
    b = a @ x0 - rng.uniform(0.1, 1.0, size=m)
    c = rng.uniform(0.0, 2.0, size=n)
    return make_problem(c, a, b, [GE] * m, lower=np.zeros(n))


def test_round_trip_residuals():
    rng = np.random.default_rng(11)
    for _ in range(60):
        problem = _random_canonical(rng)
        out = solve_lp(problem)
        assert out.status == OPTIMAL
        resid = problem.lhs @ out.x - problem.rhs
        assert np.all(resid >= -1e-7)
        assert np.all(out.x >= -1e-7)


def test_weak_duality_against_internal_certificate():
    rng = np.random.default_rng(13)
    checked = 0
    for _ in range(60):
        problem = _random_canonical(rng)
        out = solve_lp(problem)
        assert out.status == OPTIMAL
        if out.dual is None:
            continue
        y = out.dual
        # dual feasibility for min c x, Ax >= b, x >= 0: y >= 0, A^T y <= c
        assert np.all(y >= -1e-7)
        assert np.all(problem.lhs.T @ y <= problem.objective + 1e-7)
        assert float(problem.rhs @ y) <= out.objective_value + 1e-7
        checked += 1
    assert checked >= 50


def test_determinism_bitwise():
    rng = np.random.default_rng(17)
    for _ in range(10):
        problem = _random_canonical(rng)
        out1 = solve_lp(problem)
        out2 = solve_lp(problem)
        assert out1.status == out2.status
        assert out1.x.tobytes() == out2.x.tobytes()
        assert out1.objective_value == out2.objective_value


@settings(max_examples=60, deadline=None, derandomize=True)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_optimum_not_above_feasible_points(seed):
    rng = np.random.default_rng(seed)
    problem = _random_canonical(rng)
    out = solve_lp(problem)
    assert out.status == OPTIMAL
    # compare against random feasible points built from the construction
    x0 = np.abs(rng.uniform(0.5, 3.0, size=problem.n_cols))
    if np.all(problem.lhs @ x0 >= problem.rhs):
        assert out.objective_value <= problem.objective @ x0 + 1e-7


def test_free_variables_reach_negative_solutions():
    out = solve_lp(make_problem([1.0], [[1.0]], [-4.0], [GE]))
    assert out.status == OPTIMAL
    assert out.x == pytest.approx([-4.0])


def test_unbounded_ray_certified():
    # min -x - y over x - y <= 1, free vars: ray along (1, 1)
    out = solve_lp(make_problem([-1.0, -1.0], [[1.0, -1.0]], [1.0], [LE]))
    assert out.status == UNBOUNDED
    ray = out.ray
    assert float(np.array([-1.0, -1.0]) @ ray) < 0
    assert float(np.array([1.0, -1.0]) @ ray) <= 1e-9
