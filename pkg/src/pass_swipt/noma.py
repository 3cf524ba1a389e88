"""Superposition coding on a shared band: decoding order, successive
interference cancellation rates, and a concave-minorant power split.

Weakest user decodes first. Each receiver cancels everything decoded before
its own message and treats the rest as noise, so user k sees interference
only from users later in the order, all through its own channel gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ConfigurationError,
    PaLayout,
    Scenario,
    channel_power_gain,
    eu_powers,
    power_gains,
    steered_power_gain,
    uniform_layout,
)
from .pso import PlacementDomain, PsoConfig, compute_e_max, maximize
from .results import AllocationResult

LN2 = math.log(2.0)
MAX_ORDER_USERS = 8


@dataclass(frozen=True)
class NomaPowers:
    """Power split over superposed messages.

    alpha is indexed by user; b is cumulative along the decoding order,
    b[i] = sum of the power (in watts per branch) of positions i..K-1, with
    the trailing entry pinned to zero.
    """

    alpha: tuple[float, ...]
    b: tuple[float, ...]
    trace: tuple[float, ...] = field(default=())


def _user_gains(layout, scenario: Scenario, phases=None):
    params = scenario.params
    if phases is None:
        return [channel_power_gain(layout, iu, params) for iu in scenario.ius]
    return [steered_power_gain(layout, phases, iu, params) for iu in scenario.ius]


def derive_order(layout, scenario: Scenario, phases=None) -> tuple[int, ...]:
    """Decoding position of each user: ascending channel gain, ties kept in
    index order. Any other assignment breaks the gain-consistency rule, so
    the sort is equivalent to searching every permutation."""
    k = len(scenario.ius)
    if k > MAX_ORDER_USERS:
        raise ConfigurationError(
            f"decoding order search supports up to {MAX_ORDER_USERS} users, got {k}")
    gains = np.asarray(_user_gains(layout, scenario, phases))
    ranked = np.argsort(gains, kind="stable")       # position -> user
    order = [0] * k
    for pos, user in enumerate(ranked):
        order[int(user)] = pos
    return tuple(order)


def _check_order(order, gains) -> np.ndarray:
    """Returns position -> user; rejects non-permutations and orders that
    put a stronger user before a weaker one."""
    k = len(gains)
    if sorted(order) != list(range(k)):
        raise ConfigurationError(f"decoding order {order} is not a permutation")
    seq = np.empty(k, dtype=int)
    for user, pos in enumerate(order):
        seq[pos] = user
    g_sorted = np.asarray(gains)[seq]
    if np.any(np.diff(g_sorted) < 0.0):
        raise ConfigurationError(
            f"decoding order {order} conflicts with the channel gains")
    return seq


def noma_rate(k: int, layout, alpha, order, scenario: Scenario,
              phases=None) -> float:
    """Post-cancellation rate of user k under the given split and order."""
    params = scenario.params
    gains = _user_gains(layout, scenario, phases)
    _check_order(order, gains)
    if len(alpha) != len(gains):
        raise ConfigurationError(
            f"{len(alpha)} power fractions for {len(gains)} users")
    per = params.total_power_w / params.num_antennas
    own = alpha[k] * per * gains[k]
    interf = sum(alpha[i] * per * gains[k]
                 for i in range(len(gains)) if order[i] > order[k])
    return math.log2(1.0 + own / (interf + scenario.iu_noise_w(k)))


def _uniform_powers(k: int, per_branch: float) -> NomaPowers:
    alpha = (1.0 / k,) * k
    b = tuple(per_branch * (k - i) / k for i in range(k)) + (0.0,)
    return NomaPowers(alpha=alpha, b=b)


def allocate_alpha_sca(layout, order, scenario: Scenario,
                       eps_sca: float = 1e-3, phases=None,
                       max_iters: int = 60) -> tuple[NomaPowers, float]:
    """Max-min power split at a fixed layout and order.

    In cumulative budget fractions the rate at position i is
    log2(c_i t_i + 1) - log2(c_{i+1} t_i + 1) with t_i the full-budget SNR:
    a difference of concave terms. Each pass linearizes the subtracted term
    at the current point, giving a global minorant that is tight there, and
    maximizes the minorant min-rate exactly: bisection on the target, where
    a target is feasible iff the minimal cumulative chain (propagated in
    closed form from the last decoded position, folding in the
    non-increasing-share rule) fits the budget. The true min-rate never
    decreases between passes. Stops on a fractional gain below eps_sca.
    """
    params = scenario.params
    gains = _user_gains(layout, scenario, phases)
    seq = _check_order(order, gains)
    k = len(gains)
    per = params.total_power_w / params.num_antennas
    if min(gains) <= 0.0:
        return _uniform_powers(k, per), 0.0

    g = np.asarray(gains)[seq]
    sig = np.array([scenario.iu_noise_w(int(u)) for u in seq])
    t = per * g / sig

    def true_min_rate(c_vals):
        ext = np.append(c_vals, 0.0)
        rates = (np.log1p(ext[:-1] * t) - np.log1p(ext[1:] * t)) / LN2
        return float(rates.min())

    def inner_best(c_hat, tol=1e-6):
        ln_d = [math.log(c_hat[i + 1] * t[i] + 1.0) for i in range(k - 1)]
        slope = [t[i] / (c_hat[i + 1] * t[i] + 1.0) for i in range(k - 1)]

        def min_chain(xi):
            # smallest cumulative fractions meeting rate target xi; taking
            # the minimum at each position also minimizes the share step,
            # which is the loosest state for the ordering rule upstream
            target = xi * LN2
            chain = np.zeros(k)
            c_next = d_next = 0.0
            for i in range(k - 1, -1, -1):
                if i == k - 1:
                    expo = target
                else:
                    expo = target + ln_d[i] + slope[i] * (c_next - c_hat[i + 1])
                if expo > 700.0:
                    return None
                c_i = max(math.expm1(expo) / t[i], c_next + d_next)
                d_next = c_i - c_next
                c_next = c_i
                chain[i] = c_i
            if chain[0] > 1.0 + 1e-12:
                return None
            return chain

        lo, hi = 0.0, math.log2(1.0 + float(t.max()))
        best = min_chain(lo)
        if best is None:
            return None
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            ch = min_chain(mid)
            if ch is None:
                hi = mid
            else:
                lo, best = mid, ch
        if best[0] > 0.0:
            best = best / best[0]       # spend the whole budget
        return np.clip(best, 0.0, 1.0)

    c_hat = np.array([(k - i) / k for i in range(k)])
    trace = [true_min_rate(c_hat)]
    for _ in range(max_iters):
        c_new = inner_best(c_hat)
        if c_new is None:
            trace.append(trace[-1])
            break
        cur = true_min_rate(c_new)
        if cur >= trace[-1]:
            c_hat = c_new
            trace.append(cur)
        else:
            trace.append(trace[-1])
        if trace[-1] - trace[-2] < eps_sca * max(trace[-2], 1e-12):
            break

    alpha_seq = np.clip(np.diff(np.append(c_hat, 0.0)) * -1.0, 0.0, None)
    total = alpha_seq.sum()
    if total > 1.0:
        alpha_seq /= total
    alpha = np.zeros(k)
    alpha[seq] = alpha_seq
    b_out = tuple(float(per * alpha_seq[i:].sum()) for i in range(k)) + (0.0,)
    powers = NomaPowers(alpha=tuple(float(a) for a in alpha), b=b_out,
                        trace=tuple(trace))
    return powers, trace[-1]


def _min_rate_objective(scenario: Scenario, alpha):
    """Vectorized swarm fitness: each particle gets the decoding order of
    its own layout, then the min of the post-cancellation rates."""
    params = scenario.params
    per = params.total_power_w / params.num_antennas
    a = np.asarray(alpha, dtype=float)
    sig = np.array([scenario.iu_noise_w(i) for i in range(len(scenario.ius))])

    def objective(x):
        g = power_gains(x, scenario.ius, params)            # (..., K)
        ranked = np.argsort(g, axis=-1, kind="stable")
        g_s = np.take_along_axis(g, ranked, axis=-1)
        a_s = a[ranked]
        sig_s = sig[ranked]
        later = np.flip(np.cumsum(np.flip(a_s, -1), -1), -1) - a_s
        snr = a_s * per * g_s / (later * per * g_s + sig_s)
        return np.log2(1.0 + snr).min(axis=-1)

    return objective


def noma_solve(scenario: Scenario, eps_energy: float, seed=0,
               pso_cfg: PsoConfig | None = None, ao_tol: float = 1e-3,
               max_ao_iters: int = 30) -> AllocationResult:
    """Alternate swarm placement with the power-split program."""
    if eps_energy < 0.0:
        raise ConfigurationError(f"harvest target must be >= 0, got {eps_energy}")
    params = scenario.params
    cfg = pso_cfg or PsoConfig()
    k = len(scenario.ius)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(max_ao_iters + 1)

    def build_result(layout, powers, order, feasible, iters, trace):
        xs = layout.as_array()
        used = sum(powers.alpha)
        energies = tuple(used * float(e)
                         for e in eu_powers(xs, scenario.eus, params))
        rates = tuple(noma_rate(i, layout, powers.alpha, order, scenario)
                      for i in range(k))
        return AllocationResult(
            protocol="noma", variant="pass",
            min_rate_bpshz=min(rates), rates_bpshz=rates,
            min_energy_w=min(energies) if energies else math.inf,
            energies_w=energies,
            feasible=feasible, iterations=iters, trace=tuple(trace),
            layouts=(layout,), power_fractions=powers.alpha,
            decoding_order=order)

    layout = uniform_layout(params)
    order = derive_order(layout, scenario)
    powers, _ = allocate_alpha_sca(layout, order, scenario)

    if eps_energy > 0.0 and scenario.eus:
        e_max, _ = compute_e_max(scenario, cfg, children[0])
        if e_max < eps_energy * (1.0 - 1e-9):
            return build_result(layout, powers, order, False, 0, ())

    need_energy = eps_energy > 0 and bool(scenario.eus)

    def shortfall_for(alpha):
        used = sum(alpha)

        def shortfall(x):
            return eps_energy - used * eu_powers(x, scenario.eus, params).min(axis=-1)

        return shortfall

    domain = PlacementDomain(params)
    best = None         # (xi, layout, powers, order)
    trace = []
    iters = 0
    for rnd in range(max_ao_iters):
        res = maximize(_min_rate_objective(scenario, powers.alpha), domain,
                       cfg, children[rnd + 1],
                       shortfall=shortfall_for(powers.alpha) if need_energy else None,
                       shortfall_tol=eps_energy * 1e-6)
        cand_layout = PaLayout(tuple(float(v) for v in res.x))
        cand_order = derive_order(cand_layout, scenario)
        cand_powers, cand_xi = allocate_alpha_sca(cand_layout, cand_order, scenario)
        iters += 1
        if res.feasible and (best is None or cand_xi > best[0]):
            best = (cand_xi, cand_layout, cand_powers, cand_order)
            layout, powers, order = cand_layout, cand_powers, cand_order
        trace.append(best[0] if best is not None else 0.0)
        if best is not None and len(trace) >= 2:
            if trace[-1] - trace[-2] < ao_tol * max(trace[-2], 1e-30):
                break

    if best is None:
        return build_result(layout, powers, order, False, iters, trace)
    _, layout, powers, order = best
    xs = layout.as_array()
    used = sum(powers.alpha)
    energies = used * eu_powers(xs, scenario.eus, params) if scenario.eus else ()
    feasible = (not scenario.eus) or float(np.min(energies)) >= eps_energy * (1.0 - 1e-6)
    return build_result(layout, powers, order, feasible, iters, trace)
