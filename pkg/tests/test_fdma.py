"""Orthogonal-band protocol: allocation subproblem and the alternating solve."""

import math

import numpy as np
import pytest

from pass_swipt.fdma import FdmaAllocation, _allocate, allocate_w_p, fdma_rate, fdma_solve
from pass_swipt.model import (
    ConfigurationError,
    PaLayout,
    Scenario,
    SystemParams,
    UserPos,
    iu_rate_single,
    uniform_layout,
)
from pass_swipt.oracles import wp_grid
from pass_swipt.pso import PsoConfig
from pass_swipt.results import revalidate

PARAMS = SystemParams()
IU = UserPos(-4.0, 5.0, "IU")
EU = UserPos(5.0, -3.0, "EU")
PAIR = Scenario(PARAMS, (IU,), (EU,))
LAYOUT = uniform_layout(PARAMS)

FAST = PsoConfig(swarm_size=150, max_iters=150, max_stages=2)


class TestFdmaRate:
    def test_zero_power_zero_rate(self):
        assert fdma_rate(0, LAYOUT, 0.5, 0.0, PAIR) == 0.0

    def test_zero_share_zero_rate(self):
        assert fdma_rate(0, LAYOUT, 0.0, 5.0, PAIR) == 0.0

    def test_full_band_reduction(self):
        got = fdma_rate(0, LAYOUT, 1.0, PARAMS.total_power_w, PAIR)
        assert got == pytest.approx(iu_rate_single(LAYOUT, IU, PARAMS), rel=1e-12)

    def test_concave_in_share(self):
        p_k = 2.0
        mid = fdma_rate(0, LAYOUT, 0.5, p_k, PAIR)
        ends = fdma_rate(0, LAYOUT, 0.2, p_k, PAIR) + fdma_rate(0, LAYOUT, 0.8, p_k, PAIR)
        assert mid >= ends / 2.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ConfigurationError):
            fdma_rate(0, LAYOUT, 1.2, 1.0, PAIR)
        with pytest.raises(ConfigurationError):
            fdma_rate(0, LAYOUT, 0.5, -1.0, PAIR)


def rates_for(w, p, gains, sigma2, n):
    w = np.asarray(w)
    p = np.asarray(p)
    out = np.where(w > 0,
                   w * np.log2(1.0 + p * gains / (n * np.maximum(w, 1e-300) * sigma2)),
                   0.0)
    return out


class TestAllocate:
    def test_single_user_gets_everything(self):
        alloc = allocate_w_p(LAYOUT, PAIR)
        assert alloc.w == (1.0,)
        assert alloc.p == (PARAMS.total_power_w,)

    def test_identical_users_split_evenly(self):
        gains = np.array([3e-8, 3e-8])
        sigma2 = np.array([1e-12, 1e-12])
        w, p = _allocate(gains, sigma2, 10.0, 4)
        assert np.allclose(w, [0.5, 0.5], atol=1e-9)
        assert np.allclose(p, [5.0, 5.0], rtol=1e-9)

    def test_matches_two_dim_grid(self):
        gains = np.array([4e-8, 1e-8])
        sigma2 = np.array([1e-12, 1e-12])
        w, p = _allocate(gains, sigma2, PARAMS.total_power_w, PARAMS.num_antennas)
        mine = rates_for(w, p, gains, sigma2, PARAMS.num_antennas).min()
        grid_val, _, _ = wp_grid(gains, sigma2, PARAMS, steps=1000)
        assert abs(mine - grid_val) <= 2e-3

    def test_budgets_tight_and_rates_equal(self):
        rng = np.random.default_rng(9)
        for k in (2, 3, 4):
            gains = rng.uniform(0.5e-8, 8e-8, size=k)
            sigma2 = np.full(k, 1e-12)
            w, p = _allocate(gains, sigma2, 10.0, 4)
            assert np.sum(w) == pytest.approx(1.0, abs=1e-12)
            assert np.sum(p) == pytest.approx(10.0, rel=1e-12)
            rates = rates_for(w, p, gains, sigma2, 4)
            assert rates.max() - rates.min() <= 1e-9 * rates.max()

    def test_zero_gain_returns_zero_allocation(self):
        w, p = _allocate(np.array([0.0, 1e-8]), np.array([1e-12, 1e-12]), 10.0, 4)
        assert not w.any() and not p.any()

    def test_reported_min_rate_consistent(self):
        scen = Scenario(PARAMS, (IU, UserPos(4.0, 5.0, "IU")), (EU,))
        alloc = allocate_w_p(LAYOUT, scen)
        recomputed = min(fdma_rate(k, LAYOUT, alloc.w[k], alloc.p[k], scen)
                         for k in range(2))
        assert alloc.min_rate == pytest.approx(recomputed, abs=1e-12)
        assert abs(alloc.min_rate - recomputed) <= 1e-4


class TestFdmaSolve:
    def test_single_pair_matches_two_stage(self):
        from pass_swipt.single_pair import two_stage

        res = fdma_solve(PAIR, 0.0, seed=101, pso_cfg=FAST)
        target = two_stage(PAIR, 1.0).rate_bpshz
        assert res.feasible
        assert res.min_rate_bpshz >= 0.97 * target

    def test_trace_monotone_and_bounded_iters(self):
        res = fdma_solve(PAIR, 0.0, seed=7, pso_cfg=FAST)
        trace = np.asarray(res.trace)
        assert np.all(np.diff(trace) >= 0.0)
        assert res.iterations == len(res.trace)
        assert res.iterations <= 30

    def test_binding_energy_target_met(self):
        res = fdma_solve(PAIR, 2e-7, seed=5, pso_cfg=FAST)
        assert res.feasible
        assert res.min_energy_w >= 2e-7 * (1.0 - 1e-6)
        assert revalidate(res, PAIR, 2e-7) == []

    def test_energy_constraint_costs_rate(self):
        free = fdma_solve(PAIR, 0.0, seed=5, pso_cfg=FAST)
        bound = fdma_solve(PAIR, 2e-7, seed=5, pso_cfg=FAST)
        assert free.min_rate_bpshz >= bound.min_rate_bpshz

    def test_impossible_target_flagged_infeasible(self):
        res = fdma_solve(PAIR, 1.0, seed=3, pso_cfg=FAST)
        assert not res.feasible
        assert res.iterations == 0

    def test_two_user_solve_revalidates(self):
        scen = Scenario(PARAMS, (IU, UserPos(4.0, 5.0, "IU")),
                        (EU, UserPos(-5.0, -3.0, "EU")))
        res = fdma_solve(scen, 5e-8, seed=11, pso_cfg=FAST)
        assert res.feasible
        assert revalidate(res, scen, 5e-8) == []
        assert res.min_rate_bpshz == pytest.approx(min(res.rates_bpshz), rel=1e-12)
