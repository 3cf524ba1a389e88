"""Max-min rate over frequency and power splits, alternated with placement.

The allocation subproblem is concave: at the optimum every information user
attains the common rate xi, the bandwidth and power budgets are tight, and the
marginal power per bandwidth is equal across users. Parameterizing by that
marginal reduces the whole subproblem to one scalar bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ConfigurationError,
    PaLayout,
    Scenario,
    eu_powers,
    power_gains,
    uniform_layout,
    user_power_gain,
)
from .pso import PlacementDomain, PsoConfig, compute_e_max, maximize
from .results import AllocationResult

LN2 = math.log(2.0)


@dataclass(frozen=True)
class FdmaAllocation:
    w: tuple[float, ...]            # bandwidth shares, sum 1
    p: tuple[float, ...]            # transmit powers, watts, sum P
    min_rate: float                 # common rate at the optimum, bit/s/Hz
    min_energy_w: float             # worst EU harvest at the given layout


def fdma_rate(k: int, layout: PaLayout, w_k: float, p_k: float,
              scenario: Scenario, phases=None) -> float:
    """Rate of IU k on a bandwidth share w_k with power p_k, bit/s/Hz.

    The share scales both the log prefactor and the in-band noise; the limit
    at w_k = 0 is zero.
    """
    if w_k < 0.0 or w_k > 1.0:
        raise ConfigurationError(f"bandwidth share must lie in [0, 1], got {w_k}")
    if p_k < 0.0:
        raise ConfigurationError(f"power must be nonnegative, got {p_k}")
    if w_k == 0.0:
        return 0.0
    params = scenario.params
    g = user_power_gain(layout, scenario.ius[k], params, phases)
    sigma2 = scenario.iu_noise_w(k)
    snr = p_k * g / (params.num_antennas * w_k * sigma2)
    return w_k * math.log2(1.0 + snr)


def _q(u: np.ndarray) -> np.ndarray:
    """Marginal power d/dw of w*(2^(xi/w) - 1) expressed in u = xi/w.

    Strictly decreasing with q(0) = 0, so a marginal-power level identifies
    u uniquely."""
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.exp2(u) * (1.0 - u * LN2) - 1.0
    return np.where(np.isnan(val), -np.inf, val)


def _q_inv(targets: np.ndarray) -> np.ndarray:
    """Solve q(u) = t for each t < 0 by expanding-bracket bisection."""
    t = np.asarray(targets, dtype=float)
    hi = np.ones_like(t)
    for _ in range(80):
        mask = _q(hi) > t
        if not mask.any():
            break
        hi = np.where(mask, hi * 2.0, hi)
    lo = np.zeros_like(t)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        above = _q(mid) > t
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def _allocate(gains: np.ndarray, sigma2: np.ndarray, p_total: float,
              n_antennas: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-rate optimal (w, p) for per-user power gains and noise levels.

    With u_k = xi / w_k the equal-marginal condition c_k q(u_k) = -mu pins
    u_k(mu), and the budget ratio B(mu)/A(mu) = P has a unique root
    (A = sum 1/u_k, B = sum c_k (2^{u_k}-1)/u_k); xi = 1/A there.
    """
    k_users = len(gains)
    if np.any(gains <= 0.0):
        return np.zeros(k_users), np.zeros(k_users)
    if k_users == 1:
        return np.ones(1), np.array([p_total])

    c = n_antennas * sigma2 / gains

    def budget_ratio(mu: float):
        u = _q_inv(-mu / c)
        a = np.sum(1.0 / u)
        b = np.sum(c * np.expm1(u * LN2) / u)
        return b / a, u

    mu_hi = 1.0
    for _ in range(200):
        ratio, _ = budget_ratio(mu_hi)
        if ratio >= p_total:
            break
        mu_hi *= 2.0
    mu_lo = 0.0
    for _ in range(100):
        mu_mid = 0.5 * (mu_lo + mu_hi)
        ratio, _ = budget_ratio(mu_mid)
        if ratio < p_total:
            mu_lo = mu_mid
        else:
            mu_hi = mu_mid
    _, u = budget_ratio(0.5 * (mu_lo + mu_hi))

    xi = 1.0 / np.sum(1.0 / u)
    w = xi / u
    w = w / np.sum(w)
    p = c * w * np.expm1(xi / w * LN2)
    p = p * (p_total / np.sum(p))
    return w, p


def allocate_w_p(layout: PaLayout, scenario: Scenario,
                 phases=None) -> FdmaAllocation:
    """Jointly optimal bandwidth shares and powers for a fixed layout.

    Solves max xi s.t. every user's rate >= xi, sum w <= 1, sum p <= P; at
    the optimum every rate equals xi and both budgets are tight.
    """
    params = scenario.params
    k_users = len(scenario.ius)
    gains = np.array([user_power_gain(layout, iu, params, phases)
                      for iu in scenario.ius])
    sigma2 = np.array([scenario.iu_noise_w(k) for k in range(k_users)])
    scale = params.energy_conversion_eff * params.total_power_w / params.num_antennas
    energies = np.array([scale * user_power_gain(layout, eu, params, phases)
                         for eu in scenario.eus])
    min_energy = float(np.min(energies)) if energies.size else math.inf

    w, p = _allocate(gains, sigma2, params.total_power_w, params.num_antennas)
    if not np.any(p > 0.0):
        return FdmaAllocation(w=tuple(w), p=tuple(p), min_rate=0.0,
                              min_energy_w=min_energy)
    min_rate = min(fdma_rate(k, layout, float(w[k]), float(p[k]), scenario, phases)
                   for k in range(k_users))
    return FdmaAllocation(w=tuple(float(x) for x in w),
                          p=tuple(float(x) for x in p),
                          min_rate=min_rate, min_energy_w=min_energy)


def _min_rate_objective(scenario: Scenario, w, p):
    """Vectorized min-over-users rate of candidate layouts at fixed (w, p)."""
    params = scenario.params
    w = np.asarray(w)
    p = np.asarray(p)
    sigma2 = np.array([scenario.iu_noise_w(k) for k in range(len(scenario.ius))])
    denom = params.num_antennas * np.where(w > 0, w, 1.0) * sigma2

    def objective(x):
        g = power_gains(x, scenario.ius, params)
        snr = p * g / denom
        rates = w * np.log2(1.0 + snr)
        return rates.min(axis=-1)

    return objective


def _energy_shortfall(scenario: Scenario, eps_energy: float):
    params = scenario.params

    def shortfall(x):
        return eps_energy - eu_powers(x, scenario.eus, params).min(axis=-1)

    return shortfall


def fdma_solve(scenario: Scenario, eps_energy: float, seed=0,
               pso_cfg: PsoConfig | None = None, ao_tol: float = 1e-3,
               max_ao_iters: int = 30) -> AllocationResult:
    """Alternate swarm placement with the allocation subproblem.

    Keeps the best feasible (layout, w, p) seen so far; a stochastic
    regression in the swarm step never degrades the reported solution. Stops
    when a round improves the min-rate by less than ao_tol (fractional).
    """
    if eps_energy < 0.0:
        raise ConfigurationError(f"harvest target must be >= 0, got {eps_energy}")
    params = scenario.params
    cfg = pso_cfg or PsoConfig()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(max_ao_iters + 1)

    def build_result(layout, alloc, feasible, iters, trace):
        xs = layout.as_array()
        energies = tuple(float(e) for e in
                         eu_powers(xs, scenario.eus, params))
        rates = tuple(fdma_rate(k, layout, alloc.w[k], alloc.p[k], scenario)
                      for k in range(len(scenario.ius)))
        return AllocationResult(
            protocol="fdma", variant="pass",
            min_rate_bpshz=min(rates), rates_bpshz=rates,
            min_energy_w=min(energies) if energies else math.inf,
            energies_w=energies,
            feasible=feasible, iterations=iters, trace=tuple(trace),
            layouts=(layout,), bandwidth_shares=alloc.w, powers_w=alloc.p)

    if eps_energy > 0.0 and scenario.eus:
        e_max, e_xs = compute_e_max(scenario, cfg, children[0])
        if e_max < eps_energy * (1.0 - 1e-9):
            layout = PaLayout(tuple(float(v) for v in e_xs))
            alloc = allocate_w_p(layout, scenario)
            return build_result(layout, alloc, False, 0, ())

    domain = PlacementDomain(params)
    need_energy = eps_energy > 0 and bool(scenario.eus)
    shortfall = _energy_shortfall(scenario, eps_energy) if need_energy else None

    layout = uniform_layout(params)
    alloc = allocate_w_p(layout, scenario)

    best = None     # (value, layout, alloc)
    trace = []
    iters = 0
    for round_idx in range(max_ao_iters):
        objective = _min_rate_objective(scenario, alloc.w, alloc.p)
        res = maximize(objective, domain, cfg, children[round_idx + 1],
                       shortfall=shortfall,
                       shortfall_tol=eps_energy * 1e-6)
        cand_layout = PaLayout(tuple(float(v) for v in res.x))
        cand_alloc = allocate_w_p(cand_layout, scenario)
        iters += 1

        value = cand_alloc.min_rate
        if res.feasible and (best is None or value > best[0]):
            best = (value, cand_layout, cand_alloc)
        trace.append(best[0] if best is not None else 0.0)
        layout, alloc = (best[1], best[2]) if best is not None else (cand_layout, cand_alloc)

        if best is not None and len(trace) >= 2:
            gain = trace[-1] - trace[-2]
            if gain < ao_tol * max(trace[-2], 1e-30):
                break

    if best is None:
        # swarm never met the harvest target; report the last iterate honestly
        return build_result(layout, alloc, False, iters, trace)
    value, layout, alloc = best
    feasible = alloc.min_energy_w >= eps_energy * (1.0 - 1e-6)
    return build_result(layout, alloc, feasible, iters, trace)
