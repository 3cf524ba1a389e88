"""Brute-force reference optimizers used to validate the fast paths.

These are deliberately independent reimplementations: millimetre grids with
dynamic programming for separable objectives, dense pair enumeration for the
phase-aware placement objective, and simplex grids for resource splits. They
are slow and only accept small instances.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .model import (
    PaLayout,
    Scenario,
    SystemParams,
    UserPos,
    TWO_PI,
)

GRID_ANTENNA_LIMIT = 2


def _grid(params: SystemParams, step: float) -> np.ndarray:
    half = params.half_length_m
    count = int(round(2 * half / step)) + 1
    return -half + step * np.arange(count)


def separable_chain_grid(costs: np.ndarray, gap: int, maximize: bool = False):
    """Optimize sum_n costs[n, i_n] over grid indices with i_n >= i_{n-1} + gap.

    Dynamic programming over the grid; returns (best value, index tuple).
    """
    n, m = costs.shape
    if maximize:
        costs = -costs
    dp = costs[0].copy()
    choice = np.zeros((n, m), dtype=np.int64)
    for row in range(1, n):
        # prefix best of dp shifted by the spacing gap
        prefix = np.minimum.accumulate(dp)
        prefix_idx = np.zeros(m, dtype=np.int64)
        best = dp[0]
        bidx = 0
        for i in range(m):
            if dp[i] < best:
                best = dp[i]
                bidx = i
            prefix_idx[i] = bidx
        new = np.full(m, np.inf)
        valid = np.arange(m) >= gap
        new[valid] = costs[row, valid] + prefix[np.arange(m)[valid] - gap]
        choice[row, valid] = prefix_idx[np.arange(m)[valid] - gap]
        dp = new
    last = int(np.argmin(dp))
    value = dp[last]
    idxs = [last]
    for row in range(n - 1, 0, -1):
        idxs.append(int(choice[row, idxs[-1]]))
    idxs.reverse()
    if maximize:
        value = -value
    return float(value), tuple(idxs)


def chain_qp_grid(weights, targets, params: SystemParams, step: float = 1e-3):
    """Grid minimizer of the separable chain QP used inside the coarse stage."""
    xs = _grid(params, step)
    w = np.asarray(weights)[:, None]
    t = np.asarray(targets)[:, None]
    costs = w * (xs[None, :] - t) ** 2
    gap = math.ceil(params.min_spacing_m / step - 1e-9)
    value, idxs = separable_chain_grid(costs, gap, maximize=False)
    return value, xs[list(idxs)]


def reciprocal_chain_grid(scenario: Scenario, rho: float, n_antennas: int,
                          step: float = 1e-3):
    """Grid maximizer of the weighted reciprocal-distance surrogate."""
    p = scenario.params
    xs = _grid(p, step)
    iu, eu = scenario.ius[0], scenario.eus[0]
    per_point = np.zeros_like(xs)
    for user, weight in ((iu, rho), (eu, 1.0 - rho)):
        l_u = user.lateral_offset_m(p.waveguide_height_m)
        per_point += weight / np.hypot(user.x_m - xs, l_u)
    costs = np.tile(per_point, (n_antennas, 1))
    gap = math.ceil(p.min_spacing_m / step - 1e-9)
    value, idxs = separable_chain_grid(costs, gap, maximize=True)
    return value, xs[list(idxs)]


def _phasors(xs: np.ndarray, user: UserPos, params: SystemParams) -> np.ndarray:
    """Unit-path-loss phasors e^{-j phi(x)} / r(x) on the grid."""
    l_u = user.lateral_offset_m(params.waveguide_height_m)
    r = np.hypot(user.x_m - xs, l_u)
    cycles = (r / params.wavelength_m) % 1.0 + \
        ((xs + params.half_length_m) / params.guided_wavelength_m) % 1.0
    return np.exp(-1j * TWO_PI * cycles) / r


def placement_grid_search(scenario: Scenario, rho: float, n_antennas: int,
                          step: float = 1e-3, chunk: int = 128):
    """Exhaustive grid maximizer of the coherent weighted objective
    rho |sum e^{j phi_iu}/r_iu| + (1-rho) |sum e^{j phi_eu}/r_eu|
    for one or two antennas with the spacing constraint."""
    if n_antennas > GRID_ANTENNA_LIMIT:
        raise ValueError(
            f"grid search supports at most {GRID_ANTENNA_LIMIT} antennas, "
            f"got {n_antennas}")
    p = scenario.params
    iu, eu = scenario.ius[0], scenario.eus[0]
    xs = _grid(p, step)
    u_iu = _phasors(xs, iu, p)
    u_eu = _phasors(xs, eu, p)

    if n_antennas == 1:
        vals = rho * np.abs(u_iu) + (1.0 - rho) * np.abs(u_eu)
        best = int(np.argmax(vals))
        return float(vals[best]), xs[[best]]

    gap = math.ceil(p.min_spacing_m / step - 1e-9)
    m = len(xs)
    best_val = -np.inf
    best_pair = (0, gap)
    for start in range(0, m - gap, chunk):
        stop = min(start + chunk, m - gap)
        block = slice(start, stop)
        # first antenna in the block, second anywhere at least `gap` later
        v_iu = np.abs(u_iu[block, None] + u_iu[None, :])
        v_eu = np.abs(u_eu[block, None] + u_eu[None, :])
        vals = rho * v_iu + (1.0 - rho) * v_eu
        rows = np.arange(start, stop)[:, None]
        cols = np.arange(m)[None, :]
        vals[cols < rows + gap] = -np.inf
        flat = int(np.argmax(vals))
        i, j = divmod(flat, m)
        if vals[i, j] > best_val:
            best_val = float(vals[i, j])
            best_pair = (start + i, j)
    return best_val, xs[list(best_pair)]


def single_user_gain_grid(user: UserPos, params: SystemParams, n_antennas: int,
                          step: float = 1e-3):
    """Grid maximizer of |effective gain|^2 for a single user (N <= 2)."""
    scen_like = Scenario(params, (UserPos(user.x_m, user.y_m, "IU"),),
                         (UserPos(0.0, 0.0, "EU"),))
    value, xs = placement_grid_search(scen_like, 1.0, n_antennas, step)
    return (value * math.sqrt(params.path_loss_coeff)) ** 2, xs


def wp_grid(gains, noise_powers, params: SystemParams, steps: int = 1000):
    """Grid maximizer of the orthogonal max-min rate over bandwidth and power
    splits for exactly two users."""
    if len(gains) != 2:
        raise ValueError("the bandwidth/power grid oracle handles two users")
    g = np.asarray(gains, dtype=float)
    s2 = np.asarray(noise_powers, dtype=float)
    p_tot = params.total_power_w
    n = params.num_antennas
    w1 = np.linspace(1e-6, 1.0 - 1e-6, steps)
    p1 = np.linspace(0.0, p_tot, steps + 1)
    ww, pp = np.meshgrid(w1, p1, indexing="ij")
    r1 = ww * np.log2(1.0 + pp * g[0] / (n * ww * s2[0]))
    r2 = (1.0 - ww) * np.log2(1.0 + (p_tot - pp) * g[1] / (n * (1.0 - ww) * s2[1]))
    vals = np.minimum(r1, r2)
    best = int(np.argmax(vals))
    i, j = divmod(best, steps + 1)
    return float(vals[i, j]), float(w1[i]), float(p1[j])


def tau_grid(rate_consts, eu_gain_matrix, params: SystemParams, eps_energy: float,
             step: float = 1e-4, refine_rounds: int = 5):
    """Max-min rate over time shares by simplex enumeration.

    Both branches zoom: a global pass, then re-enumeration in a shrinking
    window around the incumbent. The objective is concave over the feasible
    polytope (min of linear terms, convex constraints), so the continuum
    maximizer stays within a cell or two of each round's grid argmax and
    local refinement converges to the global optimum.
    """
    c = np.asarray(rate_consts, dtype=float)
    g = np.asarray(eu_gain_matrix, dtype=float)  # (J, K)
    k = len(c)
    scale = params.energy_conversion_eff * params.total_power_w / params.num_antennas

    def value(taus):
        # taus: (..., K) with sum <= 1
        rates = taus * c
        xi = rates.min(axis=-1)
        energy = (taus[..., None, :] * g).sum(axis=-1)  # (..., J)
        ok = (scale * energy >= eps_energy - 1e-15).all(axis=-1)
        return np.where(ok, xi, -np.inf)

    if k == 2:
        lo1, hi1, s = 0.0, 1.0, step
        best_v = -np.inf
        best_t = None
        for _ in range(refine_rounds):
            t1 = np.arange(lo1, hi1 + s / 2, s)
            taus = np.stack([t1, 1.0 - t1], axis=-1)
            vals = value(taus)
            i = int(np.argmax(vals))
            if vals[i] > best_v:
                best_v = float(vals[i])
                best_t = taus[i]
            lo1, hi1 = max(t1[i] - s, 0.0), min(t1[i] + s, 1.0)
            s /= 100.0
        return best_v, best_t
    if k != 3:
        raise ValueError("tau grid oracle handles two or three slots")

    centre = np.array([0.5, 0.5])
    half = 0.5
    coarse = 0.02
    best_t = None
    best_v = -np.inf
    for _ in range(refine_rounds):
        t1 = np.arange(max(centre[0] - half, 0.0),
                       min(centre[0] + half, 1.0) + coarse / 2, coarse)
        t2 = np.arange(max(centre[1] - half, 0.0),
                       min(centre[1] + half, 1.0) + coarse / 2, coarse)
        tt1, tt2 = np.meshgrid(t1, t2, indexing="ij")
        tt3 = 1.0 - tt1 - tt2
        mask = tt3 >= -1e-12
        taus = np.stack([tt1, tt2, np.clip(tt3, 0.0, None)], axis=-1)
        vals = np.where(mask, value(taus), -np.inf)
        idx = int(np.argmax(vals))
        i, j = divmod(idx, len(t2))
        if vals[i, j] > best_v:
            best_v = float(vals[i, j])
            best_t = taus[i, j]
        centre = np.array([t1[i], t2[j]])
        half = 3.0 * coarse          # keep a couple of cells of slack
        coarse = half / 30.0
    return best_v, best_t


def alpha_grid(gains, noise_powers, params: SystemParams, step: float = 1e-4,
               refine_rounds: int = 4):
    """Max-min rate over two-user superposition splits by enumeration.

    Users are taken in decoding order (ascending gain); the stronger user's
    share alpha_2 runs over [0, 1/2] with alpha_1 = 1 - alpha_2. At the
    SNRs of interest both rates move hundreds of bits per unit share near
    the optimum, so the scan zooms: the objective is the minimum of one
    increasing and one decreasing curve, hence unimodal in alpha_2."""
    if len(gains) != 2:
        raise ValueError("the alpha grid oracle handles two users")
    g = np.asarray(gains, dtype=float)
    s2 = np.asarray(noise_powers, dtype=float)
    per_antenna = params.total_power_w / params.num_antennas

    def values(a2):
        a1 = 1.0 - a2
        r1 = np.log2(1.0 + a1 * per_antenna * g[0] / (a2 * per_antenna * g[0] + s2[0]))
        r2 = np.log2(1.0 + a2 * per_antenna * g[1] / s2[1])
        return np.minimum(r1, r2)

    lo, hi, s = 0.0, 0.5, step
    best_v, best_a2 = -np.inf, 0.0
    for _ in range(refine_rounds):
        a2 = np.arange(lo, hi + s / 2, s)
        vals = values(a2)
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v, best_a2 = float(vals[i]), float(a2[i])
        lo, hi = max(a2[i] - s, 0.0), min(a2[i] + s, 0.5)
        s /= 100.0
    return best_v, np.array([1.0 - best_a2, best_a2])


def enumerate_orders(k: int):
    """All decoding orders of k users as permutation tuples."""
    return list(itertools.permutations(range(k)))


def conjugate_beam_gain(positions, user: UserPos, params: SystemParams) -> float:
    """(sum_n |h_n|)^2: the best coherent power gain a row of radiators at
    the given x coordinates can deliver to one point through unit-modulus
    branch weights. By the triangle inequality the matched (conjugate) beam
    attains it, and only the magnitudes sqrt(eta)/r_n enter."""
    lam = 299792458.0 / params.carrier_frequency_hz
    eta = lam * lam / (16.0 * math.pi ** 2)
    l_sq = user.y_m ** 2 + params.waveguide_height_m ** 2
    total = 0.0
    for x in positions:
        r = math.sqrt((user.x_m - float(x)) ** 2 + l_sq)
        total += math.sqrt(eta) / r
    return total * total


def noma_xi_bisect(gains, noise_powers, params: SystemParams, order,
                   tol: float = 1e-9):
    """Exact fixed-order max-min superposition rate by bisection.

    Asking whether every post-cancellation rate can reach a target is linear
    in the cumulative power fractions c_1 >= ... >= c_K (c_{K+1} = 0):
    c_i t_i + 1 >= 2^xi (c_{i+1} t_i + 1) with t_i the full-budget SNR of
    the i-th decoded user, plus the non-increasing per-user share rule and
    c_1 <= 1. Each probe is a tiny LP; bisection certifies the optimum to
    tol. Running every permutation through this reproduces exhaustive
    order search without a factorial allocator.
    """
    from scipy.optimize import linprog

    g = np.asarray(gains, dtype=float)
    s2 = np.asarray(noise_powers, dtype=float)
    k = len(g)
    per = params.total_power_w / params.num_antennas
    seq = np.empty(k, dtype=int)
    for user, pos in enumerate(order):
        seq[pos] = user
    t = per * g[seq] / s2[seq]

    def feasible(xi):
        q = 2.0 ** xi
        rows = []
        rhs = []
        for i in range(k):
            row = np.zeros(k)
            row[i] = -1.0
            if i + 1 < k:
                row[i + 1] = q
            rows.append(row)
            rhs.append(-(q - 1.0) / t[i])
        for i in range(k - 1):          # share of position i >= position i+1
            row = np.zeros(k)
            row[i] = -1.0
            row[i + 1] = 2.0
            if i + 2 < k:
                row[i + 2] = -1.0
            rows.append(row)
            rhs.append(0.0)
        row = np.zeros(k)
        row[0] = 1.0
        rows.append(row)
        rhs.append(1.0)
        res = linprog(np.zeros(k), A_ub=np.vstack(rows), b_ub=np.array(rhs),
                      bounds=[(0.0, None)] * k, method="highs")
        return res.status == 0

    lo, hi = 0.0, math.log2(1.0 + float(t.max()))
    if not feasible(lo):
        return 0.0
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo
