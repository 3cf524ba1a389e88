"""Time-slotted protocol with per-slot antenna redeployment.

Each information user owns one slot whose layout is re-optimized by the
swarm; the slot lengths come from an exact linear program. Harvest coupling
across slots is handled with previous-pass (Jacobi) energy residuals, so the
slot subproblems within a pass are independent and order-free.

Frozen residuals can deadlock: when the incumbent plan over-covers the
harvest targets, every slot concludes the others will pay and chases rate
alone, and the joint plan that comes back is infeasible, leaving the
incumbent untouched. Stalled passes therefore retry with the cross-slot
contributions discounted (full trust, half, none) before the loop accepts
convergence; an improvement resets the ladder.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import (
    ConfigurationError,
    PaLayout,
    Scenario,
    channel_power_gain,
    power_gains,
    uniform_layout,
    user_power_gain,
)
from .pso import PlacementDomain, PsoConfig, compute_e_max, maximize
from .results import AllocationResult


@dataclass(frozen=True)
class TauAllocation:
    tau: tuple[float, ...]
    xi: float                     # min of tau_k * C_k at the optimum
    duality_gap: float            # |primal - dual| certificate from the LP
    feasible: bool


def _harvest_scale(params) -> float:
    return params.energy_conversion_eff * params.total_power_w / params.num_antennas


def slot_rate_const(layout: PaLayout, k: int, scenario: Scenario,
                    phases=None) -> float:
    """log2(1 + SNR_k): the full-frame rate of IU k served alone."""
    params = scenario.params
    g = user_power_gain(layout, scenario.ius[k], params, phases)
    sigma2 = scenario.iu_noise_w(k)
    return math.log2(1.0 + params.total_power_w * g / (params.num_antennas * sigma2))


def allocate_tau(rate_consts, eu_gains, scenario: Scenario,
                 eps_energy: float) -> TauAllocation:
    """Exact slot lengths: max xi s.t. tau_k C_k >= xi, sum tau <= 1,
    harvest rows >= eps. Solved as an LP with a strong-duality certificate.

    rate_consts: (K,) per-slot full-frame rates C_k.
    eu_gains: (J, K) channel power gains of EU j under slot k's layout.
    """
    c = np.asarray(rate_consts, dtype=float)
    g = np.asarray(eu_gains, dtype=float)
    k = len(c)
    j = g.shape[0] if g.size else 0
    scale = _harvest_scale(scenario.params)

    # variables: tau_1..tau_K, xi; maximize xi
    cost = np.zeros(k + 1)
    cost[-1] = -1.0
    rows = []
    rhs = []
    for i in range(k):
        row = np.zeros(k + 1)
        row[i] = -c[i]
        row[-1] = 1.0
        rows.append(row)              # xi - tau_i C_i <= 0
        rhs.append(0.0)
    rows.append(np.concatenate([np.ones(k), [0.0]]))
    rhs.append(1.0)                   # sum tau <= 1
    for jj in range(j):
        # -sum_k tau_k E_jk <= -eps, normalized so the row is O(1): raw
        # harvest coefficients sit at 1e-8 W and below, under the solver's
        # absolute feasibility tolerance, and come back silently mis-solved
        denom = scale * float(g[jj].max())
        if denom <= 0.0:
            if eps_energy > 0.0:
                return TauAllocation(tau=(0.0,) * k, xi=0.0,
                                     duality_gap=math.inf, feasible=False)
            continue
        rows.append(np.concatenate([-scale * g[jj] / denom, [0.0]]))
        rhs.append(-eps_energy / denom)
    a_ub = np.vstack(rows)
    b_ub = np.array(rhs)
    bounds = [(0.0, None)] * k + [(None, None)]

    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return TauAllocation(tau=(0.0,) * k, xi=0.0, duality_gap=math.inf,
                             feasible=False)
    tau = np.clip(res.x[:k], 0.0, None)
    xi = float(res.x[-1])
    # dual objective: only A_ub rows and the taus' zero lower bounds are
    # active sources; the latter contribute nothing at l = 0
    dual = float(b_ub @ res.ineqlin.marginals)
    gap = abs(-res.fun - (-dual))
    return TauAllocation(tau=tuple(float(t) for t in tau), xi=xi,
                         duality_gap=gap, feasible=True)


def tdma_slot_place(k: int, scenario: Scenario, eps_energy: float,
                    other_slots_energy, tau_k: float, seed,
                    pso_cfg: PsoConfig | None = None):
    """Swarm placement for slot k at fixed slot lengths.

    other_slots_energy: per-EU harvest already contributed by the other
    slots (tau-weighted, watts). The slot must cover the residual
    requirement eps - other for every EU; the penalty uses that deficit.
    """
    params = scenario.params
    cfg = pso_cfg or PsoConfig()
    domain = PlacementDomain(params)
    sigma2 = scenario.iu_noise_w(k)
    iu = scenario.ius[k]
    snr_coeff = params.total_power_w / (params.num_antennas * sigma2)

    def objective(x):
        g = power_gains(x, (iu,), params)[..., 0]
        return tau_k * np.log2(1.0 + snr_coeff * g)

    shortfall = None
    tol = 0.0
    if eps_energy > 0.0 and len(scenario.eus) > 0:
        other = np.asarray(other_slots_energy, dtype=float)
        req = eps_energy - other
        scale = _harvest_scale(params) * tau_k

        def shortfall(x):  # noqa: F811 - deliberate rebind
            slot_e = scale * power_gains(x, scenario.eus, params)
            return (req - slot_e).max(axis=-1)

        tol = eps_energy * 1e-6

    return maximize(objective, domain, cfg, seed, shortfall=shortfall,
                    shortfall_tol=tol)


def _feasibility_probe(scenario: Scenario, eps_energy: float,
                       cfg: PsoConfig, seeds):
    """Search for any harvest-feasible TDMA plan, ignoring rates.

    Tries the best single layout first, then time-shares per-EU-focused
    layouts chosen by an LP restricted to at most K distinct layouts.
    Returns (layouts, tau) or None when even the pool cannot cover eps.
    """
    params = scenario.params
    k = len(scenario.ius)
    scale = _harvest_scale(params)

    e_max, e_xs = compute_e_max(scenario, cfg, seeds[0])
    shared = PaLayout(tuple(float(v) for v in e_xs))
    if e_max >= eps_energy * (1.0 - 1e-9):
        tau = tuple(1.0 / k for _ in range(k))
        return (shared,) * k, tau

    # pool: the shared compromise plus one layout aimed at each EU
    domain = PlacementDomain(params)
    pool = [shared]
    for jj, eu in enumerate(scenario.eus):
        def objective(x, eu=eu):
            return power_gains(x, (eu,), params)[..., 0]

        res = maximize(objective, domain, cfg, seeds[1 + jj])
        pool.append(PaLayout(tuple(float(v) for v in res.x)))

    gains = np.array([[channel_power_gain(lay, eu, params) for lay in pool]
                      for eu in scenario.eus])        # (J, m)

    best = None
    for combo in itertools.combinations(range(len(pool)), min(k, len(pool))):
        sub = gains[:, combo]
        m = len(combo)
        # max xi_e s.t. scale * sub @ t >= xi_e, sum t = 1, t >= 0, with the
        # harvest expressed in units of eps so the rows are O(1) for the solver
        cost = np.zeros(m + 1)
        cost[-1] = -1.0
        a_ub = np.hstack([-scale * sub / eps_energy,
                          np.ones((sub.shape[0], 1))])
        b_ub = np.zeros(sub.shape[0])
        a_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                      bounds=[(0.0, None)] * m + [(None, None)], method="highs")
        if res.success and (best is None or -res.fun * eps_energy > best[0]):
            best = (-res.fun * eps_energy, combo, res.x[:m])
    if best is None or best[0] < eps_energy * (1.0 - 1e-9):
        return None
    _, combo, t = best
    layouts = []
    tau = []
    for idx, share in zip(combo, t):
        layouts.append(pool[idx])
        tau.append(float(share))
    while len(layouts) < k:                 # pad unused slots with zero time
        layouts.append(pool[0])
        tau.append(0.0)
    return tuple(layouts), tuple(tau)


def _plan_numbers(layouts, tau, scenario: Scenario):
    params = scenario.params
    scale = _harvest_scale(params)
    consts = [slot_rate_const(layouts[k], k, scenario)
              for k in range(len(scenario.ius))]
    rates = [tau[k] * consts[k] for k in range(len(consts))]
    energies = []
    for eu in scenario.eus:
        energies.append(sum(tau[k] * scale * channel_power_gain(layouts[k], eu, params)
                            for k in range(len(tau))))
    return consts, rates, energies


def tdma_solve(scenario: Scenario, eps_energy: float, seed=0,
               pso_cfg: PsoConfig | None = None, ao_tol: float = 1e-3,
               max_ao_iters: int = 30) -> AllocationResult:
    """Alternate per-slot placement with the exact slot-length program."""
    if eps_energy < 0.0:
        raise ConfigurationError(f"harvest target must be >= 0, got {eps_energy}")
    params = scenario.params
    cfg = pso_cfg or PsoConfig()
    k = len(scenario.ius)
    j = len(scenario.eus)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    probe_seeds = ss.spawn(1 + j)
    slot_seeds = ss.spawn(max_ao_iters * k)
    scale = _harvest_scale(params)

    def build_result(layouts, tau, feasible, iters, trace):
        _, rates, energies = _plan_numbers(layouts, tau, scenario)
        return AllocationResult(
            protocol="tdma", variant="pass",
            min_rate_bpshz=min(rates), rates_bpshz=tuple(rates),
            min_energy_w=min(energies) if energies else math.inf,
            energies_w=tuple(energies),
            feasible=feasible, iterations=iters, trace=tuple(trace),
            layouts=tuple(layouts), time_shares=tuple(tau))

    best = None     # (xi, layouts, tau)
    if eps_energy > 0.0 and j > 0:
        probe = _feasibility_probe(scenario, eps_energy, cfg, probe_seeds)
        if probe is None:
            layouts = (uniform_layout(params),) * k
            tau = tuple(1.0 / k for _ in range(k))
            return build_result(layouts, tau, False, 0, ())
        # harvest-feasible incumbent; its slot lengths already sum to one
        alloc = allocate_tau(
            [slot_rate_const(probe[0][i], i, scenario) for i in range(k)],
            np.array([[channel_power_gain(lay, eu, params) for lay in probe[0]]
                      for eu in scenario.eus]),
            scenario, eps_energy)
        if alloc.feasible:
            best = (alloc.xi, probe[0], alloc.tau)
        else:
            _, probe_rates, _ = _plan_numbers(probe[0], probe[1], scenario)
            best = (min(probe_rates), probe[0], probe[1])

    layouts = list(best[1]) if best is not None else [uniform_layout(params)] * k
    tau = list(best[2]) if best is not None else [1.0 / k] * k

    trust_ladder = (1.0, 0.5, 0.0)
    trace = []
    iters = 0
    stalls = 0
    for rnd in range(max_ao_iters):
        # Jacobi residuals: contributions frozen at the previous pass. A
        # stalled pass discounts them so the slots stop assuming the rest
        # of the frame covers the harvesters.
        trust = trust_ladder[min(stalls, len(trust_ladder) - 1)]
        contrib = np.zeros((j, k))
        for jj, eu in enumerate(scenario.eus):
            for i in range(k):
                contrib[jj, i] = tau[i] * scale * channel_power_gain(
                    layouts[i], eu, params)
        new_layouts = []
        for i in range(k):
            other = trust * (contrib.sum(axis=1) - contrib[:, i]) if j else np.zeros(0)
            res = tdma_slot_place(i, scenario, eps_energy, other, tau[i],
                                  slot_seeds[rnd * k + i], cfg)
            new_layouts.append(PaLayout(tuple(float(v) for v in res.x)))
        consts = [slot_rate_const(new_layouts[i], i, scenario) for i in range(k)]
        eu_gains = np.array([[channel_power_gain(lay, eu, params)
                              for lay in new_layouts] for eu in scenario.eus])
        alloc = allocate_tau(consts, eu_gains, scenario, eps_energy)
        iters += 1

        prev = best[0] if best is not None else 0.0
        if alloc.feasible and (best is None or alloc.xi > best[0]):
            best = (alloc.xi, tuple(new_layouts), alloc.tau)
        trace.append(best[0] if best is not None else 0.0)
        if best is not None:
            layouts, tau = list(best[1]), list(best[2])
        else:
            layouts, tau = new_layouts, tau

        if best is not None and best[0] > prev + ao_tol * max(prev, 1e-30):
            stalls = 0
        else:
            stalls += 1
            if stalls >= len(trust_ladder):
                break

    if best is None:
        return build_result(tuple(layouts), tuple(tau), False, iters, trace)
    _, layouts, tau = best
    _, _, energies = _plan_numbers(layouts, tau, scenario)
    feasible = (not energies) or min(energies) >= eps_energy * (1.0 - 1e-6)
    return build_result(layouts, tau, feasible, iters, trace)
