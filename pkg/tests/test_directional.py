"""Directional closure/interior/boundary probes and recession verdicts."""

import numpy as np
import pytest

from capreq.acceptance import (avar_acceptance, halfspace_acceptance,
                               oracle_acceptance, positive_cone)
from capreq.directional import (DEFAULT_PROBE, DirectionalProbe, dir_bd_member,
                                dir_cl_member, dir_int_member, rec_member)
from capreq.market import uniform_space
from capreq.riskmeasure import MembershipOracle, solve_rho
from conftest import corner_acceptance_r3

U2 = np.array([1.0, 1.0])


def halfplane(x) -> bool:
    return bool(x[0] >= -1e-9)


class TestClosure:
    def test_just_outside_within_final_rung(self):
        assert dir_cl_member(halfplane, U2, [-2.0 ** -30, 0.0])

    def test_member_is_in_closure(self):
        assert dir_cl_member(halfplane, U2, [0.5, 0.0])

    def test_far_outside(self):
        assert not dir_cl_member(halfplane, U2, [-1.0, 0.0])

    def test_monotonicity_diagnostic(self):
        # not up-closed along u: member at small lift but not at large one
        bad = lambda x: bool(x[0] < 0.5)
        diag = {}
        dir_cl_member(bad, U2, [0.0, 0.0], diagnostics=diag)
        assert "monotonicity_violation" in diag
        diag_ok = {}
        dir_cl_member(halfplane, U2, [0.5, 0.0], diagnostics=diag_ok)
        assert "monotonicity_violation" not in diag_ok


class TestInterior:
    def test_strictly_inside(self):
        assert dir_int_member(halfplane, U2, [1.0, 0.0])

    def test_boundary_point(self):
        assert not dir_int_member(halfplane, U2, [0.0, 0.0])

    def test_whole_space(self):
        assert dir_int_member(lambda x: True, U2, [0.0, 0.0])


class TestBoundary:
    def test_on_face(self):
        assert dir_bd_member(halfplane, U2, [0.0, 5.0])

    def test_interior_point(self):
        assert not dir_bd_member(halfplane, U2, [1.0, 1.0])

    def test_outside_point(self):
        assert not dir_bd_member(halfplane, U2, [-1.0, 0.0])


class TestProbeLadder:
    def test_default_shape(self):
        assert DEFAULT_PROBE.final_scale == pytest.approx(2.0 ** -24)
        assert DEFAULT_PROBE.epsilon_ladder[0] == 1.0

    def test_rejects_bad_ladders(self):
        with pytest.raises(ValueError):
            DirectionalProbe(epsilon_ladder=(1.0, 2.0))
        with pytest.raises(ValueError):
            DirectionalProbe(epsilon_ladder=(1.0, -0.5))
        with pytest.raises(ValueError):
            DirectionalProbe(epsilon_ladder=())


class TestRecession:
    def test_positive_cone_recedes_along_ones(self):
        check = rec_member(positive_cone(2), [1.0, 1.0])
        assert check.verdict is True and check.exact

    def test_halfspace_fails_negative_direction(self):
        check = rec_member(halfspace_acceptance([1.0, 0.0]), [-1.0, -1.0])
        assert check.verdict is False and check.exact
        base, lam = check.witness
        moved = base + lam * np.array([-1.0, -1.0])
        assert not halfspace_acceptance([1.0, 0.0])(moved)

    def test_corner_set_recedes_both_ways_along_third_axis(self):
        a = corner_acceptance_r3()
        assert rec_member(a, [0.0, 0.0, 1.0]).verdict is True
        assert rec_member(a, [0.0, 0.0, -1.0]).verdict is True

    def test_avar_block_certified(self):
        a = avar_acceptance(uniform_space(4), 0.5)
        assert rec_member(a, np.ones(4)).verdict is True
        assert rec_member(a, -np.ones(4)).verdict is False

    def test_oracle_sampling_tristate(self):
        a = oracle_acceptance(2, lambda x: bool(min(x) >= -1e-9), [-1.0, 0.0])
        assert rec_member(a, [1.0, 1.0]).verdict is None  # unknown-true
        check = rec_member(a, [-1.0, -1.0])
        assert check.verdict is False
        base, lam = check.witness
        assert not a(base + lam * np.array([-1.0, -1.0]))

    def test_oracle_base_points_must_belong(self):
        a = oracle_acceptance(2, lambda x: bool(min(x) >= -1e-9), [-1.0, 0.0])
        with pytest.raises(ValueError):
            rec_member(a, [1.0, 1.0], base_points=[np.array([-5.0, 0.0])])


class TestStructuralProperties:
    def test_sandwich(self):
        # member implies closure membership; closure membership implies a
        # nearby lifted member
        rng = np.random.default_rng(3)
        for _ in range(200):
            x = rng.uniform(-3, 3, size=2)
            if halfplane(x):
                assert dir_cl_member(halfplane, U2, x)
            if dir_cl_member(halfplane, U2, x):
                assert any(halfplane(x + t * U2) for t in DEFAULT_PROBE.epsilon_ladder)

    def test_idempotence_proxy(self):
        cl_oracle = lambda y: dir_cl_member(halfplane, U2, y)
        rng = np.random.default_rng(5)
        for _ in range(100):
            x = rng.uniform(-3, 3, size=2)
            assert dir_cl_member(cl_oracle, U2, x) == cl_oracle(x)

    def test_chain_interior_set_closure(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            x = rng.uniform(-3, 3, size=2)
            if dir_int_member(halfplane, U2, x):
                assert halfplane(x + DEFAULT_PROBE.final_scale * U2)
                assert dir_cl_member(halfplane, U2, x)

    def test_consistency_with_requirement(self, two_state_market):
        # sign of (value - m) must match the directional classification of the
        # position lifted by m, outside the tolerance band
        a = positive_cone(2)
        oracle = MembershipOracle(a, two_state_market)
        u = two_state_market.numeraire
        band = 1e-6
        rng = np.random.default_rng(9)
        for _ in range(60):
            x = rng.uniform(-4, 4, size=2)
            m = float(rng.uniform(-2, 2))
            value = solve_rho(a, two_state_market, x).value
            if abs(value - m) <= band:
                continue
            shifted = x + m * u
            if value < m:
                assert dir_int_member(oracle.contains, u, shifted)
            else:
                assert not dir_cl_member(oracle.contains, u, shifted)
