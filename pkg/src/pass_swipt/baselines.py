"""Reference transmitters for region comparisons.

Con1 is a conventional single-antenna base station fixed at the waveguide
feed point, carrying the whole power budget. Con2 keeps the element count
but radiates through a fixed half-wavelength row driven by one RF chain, so
only the branch phases adapt. Both reuse the per-protocol resource programs;
Con2 swaps the placement swarm for a phase swarm on the same engine.

The phase search is a lower bound on what an exhaustive beamformer could
reach. For a single served user the conjugate (matched) beam is optimal, so
its closed form doubles as an upper bound and a search sanity check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linprog

from .fdma import allocate_w_p, fdma_rate
from .model import (
    ConfigurationError,
    PaLayout,
    Scenario,
    SystemParams,
    channel_power_gain,
    eu_powers,
    free_space_entry,
)
from .noma import allocate_alpha_sca, derive_order, noma_rate
from .pso import PhaseDomain, PsoConfig, maximize
from .results import AllocationResult
from .tdma import allocate_tau, slot_rate_const

TWO_PI = 2.0 * math.pi
PROTOCOLS = ("fdma", "tdma", "noma")


@dataclass(frozen=True)
class FixedArray:
    """Half-wavelength BS row fed by one RF chain through phase shifters."""

    element_positions: tuple[float, ...]    # x coordinates, metres
    phase_vector: tuple[complex, ...]       # per-branch analog weights

    def __post_init__(self):
        if len(self.element_positions) != len(self.phase_vector):
            raise ConfigurationError(
                f"{len(self.element_positions)} elements but "
                f"{len(self.phase_vector)} weights")
        for w in self.phase_vector:
            if abs(abs(w) - 1.0) > 1e-12:
                raise ConfigurationError(
                    f"analog weights must be unit-modulus, got |w| = {abs(w)}")

    @classmethod
    def from_angles(cls, positions, angles_rad) -> "FixedArray":
        weights = tuple(complex(math.cos(a), math.sin(a)) for a in angles_rad)
        return cls(tuple(float(x) for x in positions), weights)

    @property
    def angles_rad(self) -> tuple[float, ...]:
        return tuple(math.atan2(w.imag, w.real) % TWO_PI
                     for w in self.phase_vector)


def fixed_array_positions(params: SystemParams) -> tuple[float, ...]:
    """Element x coordinates: lambda/2 spacing centred on the feed point."""
    n = params.num_antennas
    step = 0.5 * params.wavelength_m
    mid = -params.half_length_m
    return tuple(mid + (i - (n - 1) / 2.0) * step for i in range(n))


def _entries(positions, users, params) -> np.ndarray:
    """Free-space channel matrix, one column per user, shape (N, U)."""
    return np.array([[free_space_entry(float(x), u, params) for u in users]
                     for x in positions])


def _batch_gains(thetas, entries) -> np.ndarray:
    """|h^H w|^2 per user for phase rows thetas (..., N) -> (..., U)."""
    return np.abs(np.exp(1j * np.asarray(thetas)) @ entries) ** 2


def matched_phases(column) -> np.ndarray:
    """Conjugate beam for one channel column: aligns every branch."""
    return np.mod(-np.angle(np.asarray(column)), TWO_PI)


def con2_rate_upper_bound(scenario: Scenario) -> float:
    """Matched-filter rate bound for a lone information user, bit/s/Hz.

    Any unit-modulus beam satisfies |h^H w|^2 <= (sum |h_n|)^2 with equality
    at the conjugate beam, so this caps every protocol's Con2 rate at K = 1.
    """
    if len(scenario.ius) != 1:
        raise ConfigurationError(
            "the matched-filter bound applies to a single served user")
    params = scenario.params
    h = _entries(fixed_array_positions(params), scenario.ius, params)[:, 0]
    gain = float(np.sum(np.abs(h))) ** 2
    snr = params.total_power_w * gain / (params.num_antennas
                                         * scenario.iu_noise_w(0))
    return math.log2(1.0 + snr)


def con2_e_max(scenario: Scenario, pso_cfg: PsoConfig | None = None,
               seed=0) -> tuple[float, np.ndarray]:
    """Largest worst-EU harvest any single beam can deliver, with the beam.

    Swarm search plus the per-EU conjugate beams as deterministic
    candidates; for one EU the conjugate candidate is exactly optimal.
    """
    params = scenario.params
    n = params.num_antennas
    if not scenario.eus:
        return math.inf, np.zeros(n)
    cfg = pso_cfg or PsoConfig()
    eu_e = _entries(fixed_array_positions(params), scenario.eus, params)
    scale = params.energy_conversion_eff * params.total_power_w / n

    def worst(th):
        return scale * _batch_gains(th, eu_e).min(axis=-1)

    res = maximize(worst, PhaseDomain(n), cfg, seed)
    best_th = np.asarray(res.x, dtype=float)
    best_v = float(worst(best_th[None, :])[0])
    for j in range(eu_e.shape[1]):
        th = matched_phases(eu_e[:, j])
        v = float(worst(th[None, :])[0])
        if v > best_v:
            best_v, best_th = v, th
    return best_v, best_th


def con1_scenario(scenario: Scenario) -> Scenario:
    """Same users and budgets, one antenna carrying the whole power."""
    return Scenario(replace(scenario.params, num_antennas=1),
                    scenario.ius, scenario.eus)


def con1_solve(scenario: Scenario, protocol: str,
               eps_energy: float) -> AllocationResult:
    """Fixed single-antenna BS at the feed: resource allocation only.

    Channel gains are pinned by geometry, so each protocol reduces to its
    exact split program; there is nothing to alternate over.
    """
    _check_protocol(protocol)
    if eps_energy < 0.0:
        raise ConfigurationError(f"harvest target must be >= 0, got {eps_energy}")
    scen = con1_scenario(scenario)
    params = scen.params
    layout = PaLayout((-params.half_length_m,))
    k = len(scen.ius)
    energies = tuple(float(e) for e in
                     eu_powers(layout.as_array(), scen.eus, params))
    min_e = min(energies) if energies else math.inf
    feasible = (not energies) or min_e >= eps_energy * (1.0 - 1e-6)

    common = dict(variant="con1", min_energy_w=min_e, energies_w=energies,
                  feasible=feasible, iterations=1)

    if protocol == "fdma":
        alloc = allocate_w_p(layout, scen)
        rates = tuple(fdma_rate(i, layout, alloc.w[i], alloc.p[i], scen)
                      for i in range(k))
        return AllocationResult(
            protocol="fdma", min_rate_bpshz=min(rates), rates_bpshz=rates,
            trace=(min(rates),), layouts=(layout,),
            bandwidth_shares=alloc.w, powers_w=alloc.p, **common)

    if protocol == "tdma":
        consts = [slot_rate_const(layout, i, scen) for i in range(k)]
        g_eu = np.array([[channel_power_gain(layout, eu, params)] * k
                         for eu in scen.eus])
        alloc = allocate_tau(consts, g_eu, scen, eps_energy)
        # the harvest is the same in every slot, so infeasibility cannot be
        # fixed by slot lengths; fall back to uniform shares for the report
        tau = alloc.tau if alloc.feasible else tuple(1.0 / k for _ in range(k))
        rates = tuple(tau[i] * consts[i] for i in range(k))
        return AllocationResult(
            protocol="tdma", min_rate_bpshz=min(rates), rates_bpshz=rates,
            trace=(min(rates),), layouts=(layout,) * k,
            time_shares=tau, **common)

    order = derive_order(layout, scen)
    powers, _ = allocate_alpha_sca(layout, order, scen)
    rates = tuple(noma_rate(i, layout, powers.alpha, order, scen)
                  for i in range(k))
    used = sum(powers.alpha)
    n_energies = tuple(used * e for e in energies)
    common["energies_w"] = n_energies
    common["min_energy_w"] = min(n_energies) if n_energies else math.inf
    common["feasible"] = ((not n_energies)
                          or common["min_energy_w"] >= eps_energy * (1.0 - 1e-6))
    return AllocationResult(
        protocol="noma", min_rate_bpshz=min(rates), rates_bpshz=rates,
        trace=(min(rates),), layouts=(layout,),
        power_fractions=powers.alpha, decoding_order=order, **common)


def con2_solve(scenario: Scenario, protocol: str, eps_energy: float,
               pso_cfg: PsoConfig | None = None, seed=0,
               ao_tol: float = 1e-3, max_ao_iters: int = 30) -> AllocationResult:
    """Fixed half-wavelength row, one analog beam; phases replace positions.

    Runs the same alternation as the placement pipelines with the swarm
    acting on branch phases. Under TDMA the beam is re-formed per slot.
    """
    _check_protocol(protocol)
    if eps_energy < 0.0:
        raise ConfigurationError(f"harvest target must be >= 0, got {eps_energy}")
    cfg = pso_cfg or PsoConfig()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    if protocol == "fdma":
        return _con2_fdma(scenario, eps_energy, cfg, ss, ao_tol, max_ao_iters)
    if protocol == "tdma":
        return _con2_tdma(scenario, eps_energy, cfg, ss, ao_tol, max_ao_iters)
    return _con2_noma(scenario, eps_energy, cfg, ss, ao_tol, max_ao_iters)


def _check_protocol(protocol: str) -> None:
    if protocol not in PROTOCOLS:
        raise ConfigurationError(
            f"protocol must be one of {PROTOCOLS}, got {protocol!r}")


def _con2_fdma(scenario, eps_energy, cfg, ss, ao_tol, max_ao_iters):
    params = scenario.params
    n = params.num_antennas
    positions = fixed_array_positions(params)
    layout = PaLayout(positions)
    iu_e = _entries(positions, scenario.ius, params)
    eu_e = _entries(positions, scenario.eus, params)
    scale = params.energy_conversion_eff * params.total_power_w / n
    sigma2 = np.array([scenario.iu_noise_w(i) for i in range(len(scenario.ius))])
    children = ss.spawn(max_ao_iters + 1)

    def build_result(thetas, alloc, feasible, iters, trace):
        phases = FixedArray.from_angles(positions, thetas).angles_rad
        energies = tuple(float(scale * g)
                         for g in _batch_gains(np.asarray(phases), eu_e))
        rates = tuple(fdma_rate(i, layout, alloc.w[i], alloc.p[i], scenario,
                                phases) for i in range(len(scenario.ius)))
        return AllocationResult(
            protocol="fdma", variant="con2",
            min_rate_bpshz=min(rates), rates_bpshz=rates,
            min_energy_w=min(energies) if energies else math.inf,
            energies_w=energies,
            feasible=feasible, iterations=iters, trace=tuple(trace),
            layouts=(layout,), bandwidth_shares=alloc.w, powers_w=alloc.p,
            phases_rad=phases)

    if eps_energy > 0.0 and scenario.eus:
        e_best, th_best = con2_e_max(scenario, cfg, children[0])
        if e_best < eps_energy * (1.0 - 1e-9):
            alloc = allocate_w_p(layout, scenario, tuple(th_best))
            return build_result(th_best, alloc, False, 0, ())

    need_energy = eps_energy > 0 and bool(scenario.eus)

    def shortfall(th):
        return eps_energy - scale * _batch_gains(th, eu_e).min(axis=-1)

    thetas = np.zeros(n)
    alloc = allocate_w_p(layout, scenario, tuple(thetas))
    domain = PhaseDomain(n)

    best = None     # (value, thetas, alloc)
    trace = []
    iters = 0
    for rnd in range(max_ao_iters):
        w = np.asarray(alloc.w)
        p = np.asarray(alloc.p)
        denom = n * np.where(w > 0, w, 1.0) * sigma2

        def objective(th, w=w, p=p, denom=denom):
            g = _batch_gains(th, iu_e)
            return (w * np.log2(1.0 + p * g / denom)).min(axis=-1)

        res = maximize(objective, domain, cfg, children[rnd + 1],
                       shortfall=shortfall if need_energy else None,
                       shortfall_tol=eps_energy * 1e-6)
        cand_th = np.asarray(res.x, dtype=float)
        cand_alloc = allocate_w_p(layout, scenario, tuple(cand_th))
        iters += 1
        if res.feasible and (best is None or cand_alloc.min_rate > best[0]):
            best = (cand_alloc.min_rate, cand_th, cand_alloc)
        trace.append(best[0] if best is not None else 0.0)
        thetas, alloc = (best[1], best[2]) if best is not None else (cand_th, cand_alloc)
        if best is not None and len(trace) >= 2:
            if trace[-1] - trace[-2] < ao_tol * max(trace[-2], 1e-30):
                break

    if best is None:
        return build_result(thetas, alloc, False, iters, trace)
    _, thetas, alloc = best
    feasible = alloc.min_energy_w >= eps_energy * (1.0 - 1e-6)
    return build_result(thetas, alloc, feasible, iters, trace)


def _con2_noma(scenario, eps_energy, cfg, ss, ao_tol, max_ao_iters):
    params = scenario.params
    n = params.num_antennas
    k = len(scenario.ius)
    positions = fixed_array_positions(params)
    layout = PaLayout(positions)
    iu_e = _entries(positions, scenario.ius, params)
    eu_e = _entries(positions, scenario.eus, params)
    per = params.total_power_w / n
    scale = params.energy_conversion_eff * per
    sig = np.array([scenario.iu_noise_w(i) for i in range(k)])
    children = ss.spawn(max_ao_iters + 1)

    def build_result(thetas, powers, order, feasible, iters, trace):
        phases = FixedArray.from_angles(positions, thetas).angles_rad
        used = sum(powers.alpha)
        energies = tuple(float(used * scale * g)
                         for g in _batch_gains(np.asarray(phases), eu_e))
        rates = tuple(noma_rate(i, layout, powers.alpha, order, scenario,
                                phases=phases) for i in range(k))
        return AllocationResult(
            protocol="noma", variant="con2",
            min_rate_bpshz=min(rates), rates_bpshz=rates,
            min_energy_w=min(energies) if energies else math.inf,
            energies_w=energies,
            feasible=feasible, iterations=iters, trace=tuple(trace),
            layouts=(layout,), power_fractions=powers.alpha,
            decoding_order=order, phases_rad=phases)

    thetas = np.zeros(n)
    order = derive_order(layout, scenario, phases=tuple(thetas))
    powers, _ = allocate_alpha_sca(layout, order, scenario, phases=tuple(thetas))

    if eps_energy > 0.0 and scenario.eus:
        e_best, _ = con2_e_max(scenario, cfg, children[0])
        if e_best < eps_energy * (1.0 - 1e-9):
            return build_result(thetas, powers, order, False, 0, ())

    need_energy = eps_energy > 0 and bool(scenario.eus)

    def objective_for(alpha):
        a = np.asarray(alpha, dtype=float)

        def objective(th):
            g = _batch_gains(th, iu_e)
            ranked = np.argsort(g, axis=-1, kind="stable")
            g_s = np.take_along_axis(g, ranked, axis=-1)
            a_s = a[ranked]
            sig_s = sig[ranked]
            later = np.flip(np.cumsum(np.flip(a_s, -1), -1), -1) - a_s
            snr = a_s * per * g_s / (later * per * g_s + sig_s)
            return np.log2(1.0 + snr).min(axis=-1)

        return objective

    def shortfall_for(alpha):
        used = sum(alpha)

        def shortfall(th):
            return eps_energy - used * scale * _batch_gains(th, eu_e).min(axis=-1)

        return shortfall

    domain = PhaseDomain(n)
    best = None     # (xi, thetas, powers, order)
    trace = []
    iters = 0
    for rnd in range(max_ao_iters):
        res = maximize(objective_for(powers.alpha), domain, cfg,
                       children[rnd + 1],
                       shortfall=shortfall_for(powers.alpha) if need_energy else None,
                       shortfall_tol=eps_energy * 1e-6)
        cand_th = np.asarray(res.x, dtype=float)
        cand_order = derive_order(layout, scenario, phases=tuple(cand_th))
        cand_powers, cand_xi = allocate_alpha_sca(layout, cand_order, scenario,
                                                  phases=tuple(cand_th))
        iters += 1
        if res.feasible and (best is None or cand_xi > best[0]):
            best = (cand_xi, cand_th, cand_powers, cand_order)
            thetas, powers, order = cand_th, cand_powers, cand_order
        trace.append(best[0] if best is not None else 0.0)
        if best is not None and len(trace) >= 2:
            if trace[-1] - trace[-2] < ao_tol * max(trace[-2], 1e-30):
                break

    if best is None:
        return build_result(thetas, powers, order, False, iters, trace)
    _, thetas, powers, order = best
    used = sum(powers.alpha)
    if scenario.eus:
        min_e = float(used * scale * _batch_gains(thetas, eu_e).min())
        feasible = min_e >= eps_energy * (1.0 - 1e-6)
    else:
        feasible = True
    return build_result(thetas, powers, order, feasible, iters, trace)


def _con2_tdma(scenario, eps_energy, cfg, ss, ao_tol, max_ao_iters):
    params = scenario.params
    n = params.num_antennas
    k = len(scenario.ius)
    j = len(scenario.eus)
    positions = fixed_array_positions(params)
    layout = PaLayout(positions)
    iu_e = _entries(positions, scenario.ius, params)
    eu_e = _entries(positions, scenario.eus, params)
    scale = params.energy_conversion_eff * params.total_power_w / n
    probe_seeds = ss.spawn(1)
    slot_seeds = ss.spawn(max_ao_iters * k)

    def slot_phase_tuples(slot_thetas):
        return tuple(FixedArray.from_angles(positions, th).angles_rad
                     for th in slot_thetas)

    def plan_numbers(slot_thetas, tau):
        phases = slot_phase_tuples(slot_thetas)
        consts = [slot_rate_const(layout, i, scenario, phases[i])
                  for i in range(k)]
        rates = [tau[i] * consts[i] for i in range(k)]
        gains = np.array([_batch_gains(np.asarray(ph), eu_e)
                          for ph in phases])                      # (K, J)
        energies = [float(sum(tau[i] * scale * gains[i, jj] for i in range(k)))
                    for jj in range(j)]
        return consts, rates, energies

    def build_result(slot_thetas, tau, feasible, iters, trace):
        _, rates, energies = plan_numbers(slot_thetas, tau)
        return AllocationResult(
            protocol="tdma", variant="con2",
            min_rate_bpshz=min(rates), rates_bpshz=tuple(rates),
            min_energy_w=min(energies) if energies else math.inf,
            energies_w=tuple(energies),
            feasible=feasible, iterations=iters, trace=tuple(trace),
            layouts=(layout,) * k, time_shares=tuple(tau),
            phases_rad=slot_phase_tuples(slot_thetas))

    best = None     # (xi, slot_thetas, tau)
    if eps_energy > 0.0 and j > 0:
        probe = _con2_probe(scenario, eps_energy, cfg, probe_seeds[0], eu_e)
        if probe is None:
            slot_thetas = tuple(np.zeros(n) for _ in range(k))
            tau = tuple(1.0 / k for _ in range(k))
            return build_result(slot_thetas, tau, False, 0, ())
        phases = slot_phase_tuples(probe[0])
        alloc = allocate_tau(
            [slot_rate_const(layout, i, scenario, phases[i]) for i in range(k)],
            np.array([_batch_gains(th, eu_e) for th in probe[0]]).T,
            scenario, eps_energy)
        if alloc.feasible:
            best = (alloc.xi, probe[0], alloc.tau)
        else:
            _, probe_rates, _ = plan_numbers(probe[0], probe[1])
            best = (min(probe_rates), probe[0], probe[1])

    slot_thetas = list(best[1]) if best is not None else [np.zeros(n)] * k
    tau = list(best[2]) if best is not None else [1.0 / k] * k
    domain = PhaseDomain(n)

    trace = []
    iters = 0
    for rnd in range(max_ao_iters):
        contrib = np.zeros((j, k))
        for i in range(k):
            g = _batch_gains(slot_thetas[i], eu_e)
            for jj in range(j):
                contrib[jj, i] = tau[i] * scale * g[jj]
        new_thetas = []
        for i in range(k):
            other = contrib.sum(axis=1) - contrib[:, i] if j else np.zeros(0)
            sigma2 = scenario.iu_noise_w(i)
            snr_coeff = params.total_power_w / (n * sigma2)

            def objective(th, i=i, tau_i=tau[i], snr_coeff=snr_coeff):
                g = _batch_gains(th, iu_e)[..., i]
                return tau_i * np.log2(1.0 + snr_coeff * g)

            shortfall = None
            tol = 0.0
            if eps_energy > 0.0 and j > 0:
                req = eps_energy - np.asarray(other)
                slot_scale = scale * tau[i]

                def shortfall(th, req=req, slot_scale=slot_scale):  # noqa: F811
                    return (req - slot_scale * _batch_gains(th, eu_e)).max(axis=-1)

                tol = eps_energy * 1e-6
            res = maximize(objective, domain, cfg, slot_seeds[rnd * k + i],
                           shortfall=shortfall, shortfall_tol=tol)
            new_thetas.append(np.asarray(res.x, dtype=float))
        phases = slot_phase_tuples(new_thetas)
        consts = [slot_rate_const(layout, i, scenario, phases[i])
                  for i in range(k)]
        eu_gains = np.array([_batch_gains(th, eu_e) for th in new_thetas]).T
        alloc = allocate_tau(consts, eu_gains, scenario, eps_energy)
        iters += 1

        if alloc.feasible and (best is None or alloc.xi > best[0]):
            best = (alloc.xi, tuple(new_thetas), alloc.tau)
        trace.append(best[0] if best is not None else 0.0)
        if best is not None:
            slot_thetas, tau = list(best[1]), list(best[2])
        else:
            slot_thetas = new_thetas

        if best is not None and len(trace) >= 2:
            if trace[-1] - trace[-2] < ao_tol * max(trace[-2], 1e-30):
                break

    if best is None:
        return build_result(tuple(slot_thetas), tuple(tau), False, iters, trace)
    _, slot_thetas, tau = best
    _, _, energies = plan_numbers(slot_thetas, tau)
    feasible = (not energies) or min(energies) >= eps_energy * (1.0 - 1e-6)
    return build_result(slot_thetas, tau, feasible, iters, trace)


def _con2_probe(scenario, eps_energy, cfg, seed, eu_e):
    """Any harvest-feasible per-slot beam plan, ignoring rates.

    Shared best beam first; otherwise time-shares the per-EU conjugate
    beams (each exactly optimal for its own EU) via subset LPs.
    """
    params = scenario.params
    k = len(scenario.ius)
    scale = params.energy_conversion_eff * params.total_power_w / params.num_antennas

    e_best, th_shared = con2_e_max(scenario, cfg, seed)
    if e_best >= eps_energy * (1.0 - 1e-9):
        tau = tuple(1.0 / k for _ in range(k))
        return (th_shared,) * k, tau

    pool = [th_shared] + [matched_phases(eu_e[:, jj])
                          for jj in range(eu_e.shape[1])]
    gains = np.array([_batch_gains(th, eu_e) for th in pool]).T   # (J, m)

    best = None
    for combo in itertools.combinations(range(len(pool)), min(k, len(pool))):
        sub = gains[:, combo]
        m = len(combo)
        cost = np.zeros(m + 1)
        cost[-1] = -1.0
        a_ub = np.hstack([-scale * sub, np.ones((sub.shape[0], 1))])
        b_ub = np.zeros(sub.shape[0])
        a_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                      bounds=[(0.0, None)] * m + [(None, None)], method="highs")
        if res.success and (best is None or -res.fun > best[0]):
            best = (-res.fun, combo, res.x[:m])
    if best is None or best[0] < eps_energy * (1.0 - 1e-9):
        return None
    _, combo, t = best
    thetas = [pool[idx] for idx in combo]
    tau = [float(share) for share in t]
    while len(thetas) < k:
        thetas.append(pool[0])
        tau.append(0.0)
    return tuple(thetas), tuple(tau)
