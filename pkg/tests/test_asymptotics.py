"""Capacity iteration, dispersion search, quantiles, rate expansions."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from channelsim import asymptotics as asy
from channelsim import prob


def _h2(x):
    return -(x * math.log2(x) + (1.0 - x) * math.log2(1.0 - x))


def _ternary():
    return prob.Dmc(rows=(np.ones((3, 3)) - np.eye(3)) / 2.0)


class TestCapacityBa:
    def test_bsc_closed_form(self):
        trace = asy.capacity_ba(prob.Dmc.bsc(0.1))
        assert trace.value == pytest.approx(1.0 - _h2(0.1), abs=1e-9)

    def test_ternary_closed_form(self):
        trace = asy.capacity_ba(_ternary())
        assert trace.value == pytest.approx(math.log2(1.5), abs=1e-9)

    def test_estimates_monotone(self):
        rng = np.random.default_rng(3)
        rows = rng.random((4, 3))
        rows /= rows.sum(axis=1, keepdims=True)
        trace = asy.capacity_ba(prob.Dmc(rows=rows))
        ests = [e for _, e, _ in trace.iterates]
        assert all(a <= b + 1e-12 for a, b in zip(ests, ests[1:]))

    def test_certificate_brackets_final_value(self):
        rng = np.random.default_rng(5)
        rows = rng.random((3, 4))
        rows /= rows.sum(axis=1, keepdims=True)
        trace = asy.capacity_ba(prob.Dmc(rows=rows))
        for t, est, _ in trace.iterates:
            assert est <= trace.value + 1e-12
            assert trace.value <= est + trace.bound(t) + 1e-12

    def test_bound_formula(self):
        trace = asy.capacity_ba(prob.Dmc.bsc(0.2))
        assert trace.bound(10) == pytest.approx(math.log2(2) / 10)
        assert trace.final_bound == trace.bound(len(trace.iterates))

    def test_zero_column_dropped(self):
        # a dead output letter must not poison the reference distribution
        rows = np.array([[0.9, 0.1, 0.0], [0.2, 0.8, 0.0]])
        trace = asy.capacity_ba(prob.Dmc(rows=rows))
        want = asy.capacity_ba(prob.Dmc(rows=rows[:, :2])).value
        assert trace.value == pytest.approx(want, abs=1e-9)

    def test_init_must_cover_support(self):
        with pytest.raises(ValueError):
            asy.capacity_ba(prob.Dmc.bsc(0.1),
                            init=prob.Pmf(np.array([1.0, 0.0])))

    def test_final_input_is_capacity_achieving(self):
        trace = asy.capacity_ba(prob.Dmc.bsc(0.1))
        assert trace.final_input.probs == pytest.approx([0.5, 0.5],
                                                        abs=1e-6)


class TestDispersion:
    def test_bsc_values(self):
        params = asy.dispersion(prob.Dmc.bsc(0.1))
        want_v = 0.1 * 0.9 * math.log2(0.9 / 0.1) ** 2
        assert params.capacity == pytest.approx(1.0 - _h2(0.1), abs=1e-7)
        assert params.v_min == pytest.approx(want_v, abs=1e-5)
        assert params.v_max == pytest.approx(want_v, abs=1e-5)
        assert len(params.capacity_achieving_inputs) == 1

    def test_ternary_dispersion_zero(self):
        params = asy.dispersion(_ternary())
        assert params.capacity == pytest.approx(math.log2(1.5), abs=1e-8)
        assert abs(params.v_min) <= 1e-9
        assert abs(params.v_max) <= 1e-9

    def test_vmin_at_most_vmax(self):
        rng = np.random.default_rng(11)
        rows = rng.random((3, 3))
        rows /= rows.sum(axis=1, keepdims=True)
        params = asy.dispersion(prob.Dmc(rows=rows))
        assert params.v_min <= params.v_max + 1e-12

    def test_input_size_guard(self):
        rows = np.full((5, 2), 0.5)
        with pytest.raises(ValueError):
            asy.dispersion(prob.Dmc(rows=rows))

    def test_grid_guard_message(self):
        with pytest.raises(ValueError):
            asy.dispersion(prob.Dmc.bsc(0.1), grid_resolution=1e-9)


class TestNormalQuantile:
    def test_frozen_value(self):
        assert asy.inv_normal_cdf(0.05) == pytest.approx(
            -1.6448536269514722, abs=1e-12)

    def test_symmetry(self):
        assert asy.inv_normal_cdf(0.5) == pytest.approx(0.0, abs=1e-15)
        assert asy.inv_normal_cdf(0.975) == pytest.approx(
            -asy.inv_normal_cdf(0.025), abs=1e-12)

    @given(st.floats(1e-8, 1.0 - 1e-8))
    def test_round_trip(self, eps):
        x = asy.inv_normal_cdf(eps)
        assert asy.normal_cdf(x) == pytest.approx(eps, abs=1e-11)

    def test_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(ValueError):
                asy.inv_normal_cdf(bad)


class TestSecondOrder:
    def test_formulas(self):
        params = asy.dispersion(prob.Dmc.bsc(0.1))
        n, eps = 100, 0.05
        phi = asy.inv_normal_cdf(eps)
        want_code = n * params.capacity + math.sqrt(n * params.v_min) * phi
        got_code = asy.second_order_coding(params, n, eps)
        assert got_code == pytest.approx(want_code, abs=1e-9)
        phi_hi = asy.inv_normal_cdf(1.0 - eps)
        want_sim = n * params.capacity + math.sqrt(n * params.v_max) * phi_hi
        got_sim = asy.second_order_simulation(params, n, eps)
        assert got_sim == pytest.approx(want_sim, abs=1e-9)

    def test_frozen_values(self):
        params = asy.dispersion(prob.Dmc.bsc(0.1))
        assert asy.second_order_simulation(params, 100, 0.05) \
            == pytest.approx(68.7426, abs=2e-3)
        assert asy.second_order_coding(params, 100, 0.05) \
            == pytest.approx(37.4583, abs=2e-3)

    def test_variance_branch_at_half(self):
        # exactly at eps = 1/2 the upper variance is used on both curves
        params = asy.SecondOrderParams(
            capacity=1.0, v_min=0.5, v_max=2.0,
            capacity_achieving_inputs=(prob.Pmf.uniform(2),), tol_cap=1e-7)
        assert asy.second_order_coding(params, 4, 0.5) == pytest.approx(4.0)
        assert asy.second_order_simulation(params, 4, 0.5) \
            == pytest.approx(4.0)
        # below one half: coding uses v_min, simulation (level 1 - eps)
        # sits above one half and uses v_max
        phi = asy.inv_normal_cdf(0.25)
        assert asy.second_order_coding(params, 4, 0.25) == pytest.approx(
            4.0 + math.sqrt(4 * 0.5) * phi)
        assert asy.second_order_simulation(params, 4, 0.25) \
            == pytest.approx(4.0 - math.sqrt(4 * 2.0) * phi)

    def test_simulation_above_coding(self):
        params = asy.dispersion(prob.Dmc.bsc(0.1))
        for n in (10, 100, 1000):
            assert asy.second_order_simulation(params, n, 0.05) \
                > asy.second_order_coding(params, n, 0.05)


class TestModerate:
    def test_default_schedule(self):
        params = asy.dispersion(prob.Dmc.bsc(0.1))
        got = asy.moderate_deviation_rates(params, 1000)
        assert got.a_n == pytest.approx(1000.0 ** (-1.0 / 3.0))
        assert got.eps_n == pytest.approx(2.0 ** (-1000 * got.a_n ** 2))
        assert got.band == "unquantified"

    def test_sign_pairing(self):
        params = asy.SecondOrderParams(
            capacity=1.0, v_min=0.25, v_max=1.0,
            capacity_achieving_inputs=(prob.Pmf.uniform(2),), tol_cap=1e-7)
        got = asy.moderate_deviation_rates(params, 100, a_n=0.1)
        assert got.simulation_at_eps == pytest.approx(
            1.0 + math.sqrt(2.0) * 0.1)
        assert got.simulation_at_complement == pytest.approx(
            1.0 - math.sqrt(0.5) * 0.1)
        assert got.coding_at_eps == pytest.approx(1.0 - math.sqrt(0.5) * 0.1)
        assert got.coding_at_complement == pytest.approx(
            1.0 + math.sqrt(2.0) * 0.1)

    def test_frozen_value(self):
        params = asy.dispersion(prob.Dmc.bsc(0.1))
        got = asy.moderate_deviation_rates(params, 1000)
        assert got.simulation_at_eps == pytest.approx(0.665493, abs=1e-5)

    def test_rates_straddle_capacity(self):
        params = asy.dispersion(prob.Dmc.bsc(0.2))
        got = asy.moderate_deviation_rates(params, 500)
        assert got.coding_at_eps < params.capacity < got.simulation_at_eps


class TestBracket:
    def test_quarter_and_half(self):
        lo, hi = asy.cs_cc_bracket(7.0, 9.0, 0.25)
        assert lo == pytest.approx(7.0 - 2.0, abs=1e-12)
        assert hi == pytest.approx(9.0 + 3.0 + math.log2(math.log2(64.0)),
                                   abs=1e-12)
        lo2, hi2 = asy.cs_cc_bracket(5.0, 5.0, 0.5)
        assert lo2 == pytest.approx(5.0 - 1.0, abs=1e-12)
        assert hi2 == pytest.approx(5.0 + 4.0, abs=1e-12)

    @given(st.floats(1e-6, 0.5), st.floats(0.0, 40.0), st.floats(0.0, 10.0))
    def test_ordered(self, delta, base, gap):
        lo, hi = asy.cs_cc_bracket(base, base + gap, delta)
        assert lo <= hi

    def test_domain(self):
        with pytest.raises(ValueError):
            asy.cs_cc_bracket(1.0, 2.0, 0.0)
        with pytest.raises(ValueError):
            asy.cs_cc_bracket(1.0, 2.0, 1.0)
