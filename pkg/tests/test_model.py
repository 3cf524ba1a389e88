"""Channel model checks against a high-precision reimplementation.

Expected values were computed with mpmath at 50 digits and frozen here;
the helper below recomputes gains independently for randomized layouts.
"""

import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pass_swipt.model import (
    ConfigurationError,
    PaLayout,
    Scenario,
    SystemParams,
    UserPos,
    dbm_to_watts,
    effective_gain,
    effective_gains,
    eu_power_single,
    free_space_entry,
    guided_phase,
    iu_rate_single,
    channel_power_gain,
    uniform_layout,
    watts_to_dbm,
)

mp.mp.dps = 50

PARAMS = SystemParams()          # 28 GHz defaults
IU1 = UserPos(-4.0, 5.0, "IU")
EU1 = UserPos(5.0, -3.0, "EU")


def mp_effective_gain(xs, user, params):
    """Independent high-precision evaluation of the combined channel."""
    lam = mp.mpf(299792458) / mp.mpf(params.carrier_frequency_hz)
    lam_g = lam / mp.mpf(params.refractive_index)
    eta = lam ** 2 / (16 * mp.pi ** 2)
    half = mp.mpf(params.waveguide_length_m) / 2
    lu = mp.sqrt(mp.mpf(user.y_m) ** 2 + mp.mpf(params.waveguide_height_m) ** 2)
    total = mp.mpc(0)
    for x in xs:
        r = mp.sqrt((mp.mpf(user.x_m) - mp.mpf(x)) ** 2 + lu ** 2)
        phase = 2 * mp.pi * (r / lam + (mp.mpf(x) + half) / lam_g)
        total += mp.sqrt(eta) / r * mp.e ** (-1j * phase)
    return complex(total)


class TestUnitConversions:
    def test_dbm_to_watts_anchors(self):
        assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-12)
        assert dbm_to_watts(40.0) == pytest.approx(10.0, rel=1e-12)
        assert dbm_to_watts(-90.0) == pytest.approx(1e-12, rel=1e-12)

    @given(st.floats(min_value=-120.0, max_value=60.0))
    def test_round_trip(self, p_dbm):
        assert watts_to_dbm(dbm_to_watts(p_dbm)) == pytest.approx(p_dbm, abs=1e-9)

    def test_watts_to_dbm_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            watts_to_dbm(0.0)


class TestDerivedParams:
    def test_wavelengths(self):
        assert PARAMS.wavelength_m == pytest.approx(0.0107068735, rel=1e-12)
        assert PARAMS.guided_wavelength_m == pytest.approx(
            0.0076477667857142857, rel=1e-12)
        assert PARAMS.path_loss_coeff == pytest.approx(7.2594817055401154e-07, rel=1e-12)
        assert PARAMS.min_spacing_m == pytest.approx(PARAMS.wavelength_m / 2, rel=1e-15)

    def test_rejects_bad_params(self):
        with pytest.raises(ConfigurationError):
            SystemParams(refractive_index=0.9)
        with pytest.raises(ConfigurationError):
            SystemParams(energy_conversion_eff=0.0)
        with pytest.raises(ConfigurationError):
            SystemParams(num_antennas=0)
        with pytest.raises(ConfigurationError):
            # 64 antennas at 1 m spacing exceed a 20 m guide
            SystemParams(num_antennas=64, min_spacing_m=1.0)


class TestGuidedPhase:
    def test_feed_end_is_zero(self):
        assert guided_phase(-10.0, PARAMS) == 0.0

    def test_one_guided_wavelength(self):
        x = -10.0 + PARAMS.guided_wavelength_m
        assert guided_phase(x, PARAMS) == pytest.approx(2 * math.pi, rel=1e-12)

    def test_midpoint_frozen_value(self):
        # (2 pi / lambda_g) * 10 at 28 GHz, n_eff = 1.4
        assert guided_phase(0.0, PARAMS) == pytest.approx(8215.7124860505927, rel=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            guided_phase(10.5, PARAMS)


class TestFreeSpaceEntry:
    def test_frozen_magnitude_and_phase(self):
        # PA at x = 0, user (-4, 5), d = 3 -> r = sqrt(50)
        entry = free_space_entry(0.0, IU1, PARAMS)
        assert abs(entry) == pytest.approx(1.2049466133850176e-04, rel=1e-12)
        assert entry.real == pytest.approx(-1.0674101498499507e-04, rel=1e-11)
        assert entry.imag == pytest.approx(-5.5904553759539919e-05, rel=1e-11)

    def test_magnitude_is_path_loss_only(self):
        entry = free_space_entry(3.0, EU1, PARAMS)
        r = math.sqrt((5.0 - 3.0) ** 2 + 9.0 + 9.0)
        assert abs(entry) == pytest.approx(math.sqrt(PARAMS.path_loss_coeff) / r, rel=1e-12)


class TestEffectiveGain:
    def test_single_antenna_reduces_to_entry(self):
        layout = PaLayout((1.25,))
        g = effective_gain(layout, IU1, PARAMS)
        e = free_space_entry(1.25, IU1, PARAMS)
        assert abs(g) == pytest.approx(abs(e), rel=1e-12)

    def test_matches_high_precision_reference(self):
        # Error is measured against the incoherent entry scale: the sum itself
        # can be arbitrarily small under destructive interference, while the
        # double-precision floor of each term sits near 1e-12 of its magnitude
        # (phase arguments are ~1e3 wavelengths).
        rng = np.random.default_rng(7)
        for _ in range(20):
            xs = np.sort(rng.uniform(-10, 10, size=4))
            xs += np.arange(4) * PARAMS.min_spacing_m  # guarantee legal spacing
            xs = np.clip(xs, -10, 10)
            layout = PaLayout(tuple(np.sort(xs)))
            for user in (IU1, EU1):
                got = effective_gain(layout, user, PARAMS)
                want = mp_effective_gain(layout.x_m, user, PARAMS)
                scale = sum(abs(free_space_entry(x, user, PARAMS)) for x in layout.x_m)
                assert abs(got - want) <= 2e-12 * scale

    @given(st.permutations(list(range(4))))
    @settings(max_examples=24, deadline=None)
    def test_permutation_invariance(self, perm):
        xs = (-6.0, -1.5, 2.25, 8.0)
        shuffled = PaLayout(tuple(xs[i] for i in perm))
        base = abs(effective_gain(PaLayout(xs), IU1, PARAMS))
        assert abs(effective_gain(shuffled, IU1, PARAMS)) == pytest.approx(base, rel=1e-12)

    @given(st.lists(st.floats(min_value=-10.0, max_value=10.0), min_size=1, max_size=6))
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, xs):
        layout = PaLayout(tuple(xs))
        bound = sum(abs(free_space_entry(x, EU1, PARAMS)) for x in xs)
        assert abs(effective_gain(layout, EU1, PARAMS)) <= bound * (1 + 1e-12)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(11)
        positions = rng.uniform(-10, 10, size=(50, 4))
        users = [IU1, EU1, UserPos(0.0, 0.5, "EU")]
        gains = effective_gains(positions, users, PARAMS)
        for s in range(0, 50, 7):
            layout = PaLayout(tuple(positions[s]))
            for u, user in enumerate(users):
                want = effective_gain(layout, user, PARAMS)
                assert abs(gains[s, u] - want) <= 1e-12 * max(abs(want), 1e-30)


class TestRateAndHarvest:
    def test_frozen_four_antenna_rate(self):
        # N = 4 equispaced over [-2, 2], IU (-4, 5), P = 10 W, sigma2 = 1e-12 W
        layout = PaLayout((-2.0, -2.0 / 3.0, 2.0 / 3.0, 2.0))
        assert channel_power_gain(layout, IU1, PARAMS) == pytest.approx(
            3.4907407234051989e-08, rel=1e-10)
        assert iu_rate_single(layout, IU1, PARAMS) == pytest.approx(
            16.413190209960655, rel=1e-10)

    def test_rate_monotone_in_power(self):
        layout = uniform_layout(PARAMS)
        lo = SystemParams(total_power_w=1.0)
        hi = SystemParams(total_power_w=10.0)
        assert iu_rate_single(layout, IU1, hi) > iu_rate_single(layout, IU1, lo)

    def test_per_user_noise_override(self):
        layout = uniform_layout(PARAMS)
        quiet = UserPos(-4.0, 5.0, "IU", noise_power_w=1e-13)
        assert iu_rate_single(layout, quiet, PARAMS) > iu_rate_single(layout, IU1, PARAMS)

    def test_frozen_overhead_harvest(self):
        # single PA right above the EU: r = d = 3 m, N = 1, zeta = 0.5, P = 10 W
        params = SystemParams(num_antennas=1)
        eu = UserPos(2.0, 0.0, "EU")
        layout = PaLayout((2.0,))
        assert eu_power_single(layout, eu, params) == pytest.approx(
            4.0330453919667308e-07, rel=1e-12)

    def test_harvest_linear_in_power_and_zeta(self):
        layout = PaLayout((-1.0, 0.0, 1.0, 2.0))
        base = eu_power_single(layout, EU1, PARAMS)
        doubled = SystemParams(total_power_w=20.0)
        assert eu_power_single(layout, EU1, doubled) == pytest.approx(2 * base, rel=1e-12)
        zeta1 = SystemParams(energy_conversion_eff=1.0)
        assert eu_power_single(layout, EU1, zeta1) == pytest.approx(2 * base, rel=1e-12)


class TestLayoutAndScenario:
    def test_uniform_layout_is_legal(self):
        uniform_layout(PARAMS).validate(PARAMS)
        uniform_layout(SystemParams(num_antennas=1)).validate(PARAMS)

    def test_layout_spacing_violation(self):
        layout = PaLayout((0.0, 1e-4))
        with pytest.raises(ConfigurationError):
            layout.validate(PARAMS)

    def test_layout_range_violation(self):
        with pytest.raises(ConfigurationError):
            PaLayout((-11.0,)).validate(PARAMS)

    def test_scenario_requires_an_information_user(self):
        with pytest.raises(ConfigurationError):
            Scenario(PARAMS, (), (EU1,))

    def test_scenario_allows_no_harvesters(self):
        scen = Scenario(PARAMS, (IU1,), ())
        assert scen.eus == ()

    def test_scenario_rejects_outside_users(self):
        with pytest.raises(ConfigurationError):
            Scenario(PARAMS, (UserPos(-4.0, 12.0, "IU"),), (EU1,))

    def test_scenario_rejects_mismatched_kinds(self):
        with pytest.raises(ConfigurationError):
            Scenario(PARAMS, (UserPos(0.0, 0.0, "EU"),), (EU1,))
