"""Result records shared by the protocol solvers, plus independent checks.

revalidate() recomputes every reported number from the stored decision
variables (layouts, resource splits, phases) with scalar formulas, so a
bookkeeping bug in a solver cannot certify itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    PaLayout,
    Scenario,
    effective_gain,
    steered_power_gain,
)

ENERGY_SLACK = 1e-6     # feasible results may undershoot the target by this fraction
SUM_TOL = 1e-9          # slack on resource sums (bandwidth, power, time, fractions)


@dataclass(frozen=True)
class AllocationResult:
    """Outcome of one protocol solve on one scenario."""

    protocol: str                           # "fdma" | "tdma" | "noma"
    variant: str                            # "pass" | "con1" | "con2"
    min_rate_bpshz: float
    rates_bpshz: tuple[float, ...]
    min_energy_w: float
    energies_w: tuple[float, ...]
    feasible: bool
    iterations: int                         # outer alternating rounds
    trace: tuple[float, ...]                # best min-rate after each round
    layouts: tuple[PaLayout, ...]           # one entry, or one per slot for tdma
    bandwidth_shares: tuple[float, ...] | None = None
    powers_w: tuple[float, ...] | None = None
    time_shares: tuple[float, ...] | None = None
    power_fractions: tuple[float, ...] | None = None
    decoding_order: tuple[int, ...] | None = None
    phases_rad: tuple[float, ...] | None = None   # fixed-array beamformer


def _gain(layout: PaLayout, user, params) -> float:
    return abs(effective_gain(layout, user, params)) ** 2


def _con2_gain(layout: PaLayout, phases, user, params) -> float:
    """|h^H w|^2 for a fixed array steered by unit-modulus phase weights."""
    return steered_power_gain(layout, phases, user, params)


def _recompute(result: AllocationResult, scenario: Scenario):
    """Rates (per IU) and harvests (per EU) implied by the stored variables."""
    p = scenario.params
    ius, eus = scenario.ius, scenario.eus
    n_pa = len(result.layouts[0].x_m)
    per_branch = p.total_power_w / n_pa

    def gain(layout, user, phase_row=None):
        if phase_row is not None:
            return _con2_gain(layout, phase_row, user, p)
        return _gain(layout, user, p)

    if result.protocol == "fdma":
        layout = result.layouts[0]
        w = result.bandwidth_shares
        pw = result.powers_w
        rates = []
        for k, iu in enumerate(ius):
            sigma2 = scenario.iu_noise_w(k)
            if w[k] <= 0.0:
                rates.append(0.0)
                continue
            snr = pw[k] * gain(layout, iu, result.phases_rad) / (n_pa * w[k] * sigma2)
            rates.append(w[k] * math.log2(1.0 + snr))
        total_p = sum(pw)
        energies = [p.energy_conversion_eff * (total_p / n_pa)
                    * gain(layout, eu, result.phases_rad) for eu in eus]
        return rates, energies

    if result.protocol == "tdma":
        # with a fixed array the beam is re-formed per slot, so phases_rad
        # holds one phase row per slot
        tau = result.time_shares

        def slot_phases(k):
            return None if result.phases_rad is None else result.phases_rad[k]

        rates = []
        for k, iu in enumerate(ius):
            sigma2 = scenario.iu_noise_w(k)
            snr = per_branch * gain(result.layouts[k], iu, slot_phases(k)) / sigma2
            rates.append(tau[k] * math.log2(1.0 + snr))
        energies = []
        for eu in eus:
            e = sum(tau[k] * p.energy_conversion_eff * per_branch
                    * gain(result.layouts[k], eu, slot_phases(k))
                    for k in range(len(ius)))
            energies.append(e)
        return rates, energies

    if result.protocol == "noma":
        from .noma import noma_rate

        layout = result.layouts[0]
        alpha = result.power_fractions
        order = result.decoding_order
        rates = [noma_rate(k, layout, alpha, order, scenario,
                           phases=result.phases_rad) for k in range(len(ius))]
        total_p = sum(alpha) * p.total_power_w
        energies = [p.energy_conversion_eff * (total_p / n_pa)
                    * gain(layout, eu, result.phases_rad) for eu in eus]
        return rates, energies

    raise ValueError(f"unknown protocol {result.protocol!r}")


def revalidate(result: AllocationResult, scenario: Scenario,
               eps_energy: float, rate_tol: float = 1e-7) -> list[str]:
    """List of consistency violations; empty means the record checks out."""
    p = scenario.params
    problems = []

    for layout in result.layouts:
        if result.variant == "con2":
            break  # fixed array, positions are not decision variables
        try:
            layout.validate(p)
        except Exception as exc:  # noqa: BLE001 - report, do not raise
            problems.append(f"layout invalid: {exc}")

    if result.bandwidth_shares is not None:
        w = result.bandwidth_shares
        if min(w) < -SUM_TOL or sum(w) > 1.0 + SUM_TOL:
            problems.append(f"bandwidth shares out of simplex: {w}")
    if result.powers_w is not None:
        pw = result.powers_w
        if min(pw) < -SUM_TOL or sum(pw) > p.total_power_w * (1.0 + SUM_TOL):
            problems.append(f"powers exceed budget: {pw}")
    if result.time_shares is not None:
        tau = result.time_shares
        if min(tau) < -SUM_TOL or sum(tau) > 1.0 + SUM_TOL:
            problems.append(f"time shares out of simplex: {tau}")
    if result.power_fractions is not None:
        a = result.power_fractions
        if min(a) < -SUM_TOL or sum(a) > 1.0 + SUM_TOL:
            problems.append(f"power fractions out of simplex: {a}")
    if result.decoding_order is not None:
        order = result.decoding_order
        if sorted(order) != list(range(len(order))):
            problems.append(f"decoding order is not a permutation: {order}")
        else:
            from .noma import derive_order

            expect = derive_order(result.layouts[0], scenario,
                                  phases=result.phases_rad)
            if tuple(expect) != tuple(order):
                problems.append(
                    f"decoding order {order} disagrees with gain order {expect}")

    rates, energies = _recompute(result, scenario)
    for got, want in zip(result.rates_bpshz, rates):
        if abs(got - want) > rate_tol * max(abs(want), 1.0):
            problems.append(f"stored rate {got} != recomputed {want}")
    for got, want in zip(result.energies_w, energies):
        if abs(got - want) > rate_tol * max(abs(want), 1e-12):
            problems.append(f"stored energy {got} != recomputed {want}")
    if abs(result.min_rate_bpshz - min(rates)) > rate_tol * max(min(rates), 1.0):
        problems.append("min rate is not the minimum of the rates")
    if energies:
        if abs(result.min_energy_w - min(energies)) > rate_tol * max(min(energies), 1e-12):
            problems.append("min energy is not the minimum of the energies")
        if result.feasible and min(energies) < eps_energy * (1.0 - ENERGY_SLACK):
            problems.append(
                f"feasible result undershoots harvest target: "
                f"{min(energies)} < {eps_energy}")
    elif eps_energy > 0.0 and result.feasible and not math.isinf(result.min_energy_w):
        problems.append("no harvesters but a finite min energy is claimed")
    return problems


def pareto_filter(points):
    """Boolean mask of non-dominated (rate, energy) pairs, larger is better
    in both coordinates. Ties are kept."""
    pts = list(points)
    keep = []
    for i, (r_i, e_i) in enumerate(pts):
        dominated = any(
            (r_j >= r_i and e_j >= e_i) and (r_j > r_i or e_j > e_i)
            for j, (r_j, e_j) in enumerate(pts) if j != i)
        keep.append(not dominated)
    return keep
