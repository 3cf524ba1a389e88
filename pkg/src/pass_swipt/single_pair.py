"""Two-stage antenna placement for one information user and one energy user.

Stage one maximizes a weighted sum of reciprocal antenna-user distances via
successive convex approximation; each iterate reduces to a separable chain
QP solved exactly by block merging. Stage two re-spaces the antennas so the
per-user carrier phases recombine coherently, staying close to the coarse
layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ConfigurationError,
    PaLayout,
    Scenario,
    SystemParams,
    UserPos,
    eu_power_single,
    free_space_entry,
    iu_rate_single,
    uniform_layout,
    TWO_PI,
)


def solve_chain_qp(weights, targets, spacing, lo, hi):
    """Minimize sum_n w_n (x_n - t_n)^2 subject to x_{n+1} - x_n >= spacing
    and lo <= x_n <= hi. Exact solution by merging adjacent tight blocks.

    Within a block starting at s the positions are xi + j*spacing; the
    unconstrained block base is the weighted mean of (t_n - j*spacing) and the
    box clamps it into [lo, hi - (m-1)*spacing]. Blocks merge while the
    inter-block spacing constraint is violated.
    """
    w = np.asarray(weights, dtype=float)
    t = np.asarray(targets, dtype=float)
    n = len(w)
    if n != len(t):
        raise ValueError("weights and targets must have equal length")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if (n - 1) * spacing > hi - lo + 1e-12:
        raise ConfigurationError("spacing infeasible for the given box")

    # stack entries: [start, count, sum_w, sum_w * (t_n - (n - start) * spacing)]
    starts = []
    counts = []
    sws = []
    swts = []
    bases = []

    def clamp_base(sw, swt, count):
        xi = swt / sw
        return min(max(xi, lo), hi - (count - 1) * spacing)

    for i in range(n):
        starts.append(i)
        counts.append(1)
        sws.append(w[i])
        swts.append(w[i] * t[i])
        bases.append(clamp_base(sws[-1], swts[-1], 1))
        # merge while the previous block's tail would overlap this block's head
        while len(starts) > 1 and bases[-1] < bases[-2] + counts[-2] * spacing:
            shift = starts[-1] - starts[-2]
            sw = sws[-2] + sws[-1]
            swt = swts[-2] + swts[-1] - sws[-1] * shift * spacing
            count = counts[-2] + counts[-1]
            for stack in (starts, counts, sws, swts, bases):
                stack.pop()
            counts[-1] = count
            sws[-1] = sw
            swts[-1] = swt
            bases[-1] = clamp_base(sw, swt, count)

    x = np.empty(n)
    for start, count, base in zip(starts, counts, bases):
        x[start:start + count] = base + np.arange(count) * spacing
    return x


def chain_qp_kkt_residual(x, weights, targets, spacing, lo, hi, active_tol=1e-7):
    """Max KKT violation of a candidate chain-QP solution.

    Multipliers for the active constraints are fitted by non-negative least
    squares on the stationarity system; the residual folds in primal
    feasibility and stationarity error.
    """
    from scipy.optimize import nnls

    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    t = np.asarray(targets, dtype=float)
    n = len(x)
    grad = 2.0 * w * (x - t)

    cols = []
    primal = 0.0
    for i in range(1, n):
        gap = x[i] - x[i - 1] - spacing
        primal = max(primal, -gap)
        if gap <= active_tol:
            col = np.zeros(n)
            col[i - 1] = 1.0
            col[i] = -1.0
            cols.append(col)
    for i in range(n):
        primal = max(primal, lo - x[i], x[i] - hi)
        if x[i] - lo <= active_tol:
            col = np.zeros(n)
            col[i] = -1.0
            cols.append(col)
        if hi - x[i] <= active_tol:
            col = np.zeros(n)
            col[i] = 1.0
            cols.append(col)

    if cols:
        a_mat = np.column_stack(cols)
        _, res = nnls(a_mat, -grad)
        stationarity = res
    else:
        stationarity = float(np.linalg.norm(grad))
    return max(primal, stationarity)


@dataclass(frozen=True)
class ScaState:
    """One iterate of the coarse placement stage."""

    layout: PaLayout
    y_iu: tuple[float, ...]      # squared IU distances, tight at the layout
    y_eu: tuple[float, ...]
    iteration: int
    objective: float             # weighted reciprocal-distance value
    trace: tuple[float, ...]     # objective after each accepted iterate


@dataclass(frozen=True)
class WeightedObjective:
    """Weighted phasor-magnitude objective value at weight rho."""

    rho: float
    value: float


@dataclass(frozen=True)
class FineTuneResult:
    """Outcome of the phase-alignment stage."""

    layout: PaLayout
    ref_index: int
    steps: tuple[int, ...]       # per-antenna integer phase sums m_n (0 at ref)
    clamped: bool                # some position was range-clamped
    drift_exceeded: bool         # no step choice stayed within the drift bound


@dataclass(frozen=True)
class TwoStageResult:
    layout: PaLayout
    objective: WeightedObjective
    rate_bpshz: float
    harvest_w: float
    coarse: ScaState
    fine: FineTuneResult


def _single_pair(scenario: Scenario) -> tuple[UserPos, UserPos]:
    if len(scenario.ius) != 1 or len(scenario.eus) != 1:
        raise ConfigurationError(
            "the two-stage method serves exactly one IU and one EU; got "
            f"{len(scenario.ius)} IUs and {len(scenario.eus)} EUs")
    return scenario.ius[0], scenario.eus[0]


def _distances(xs: np.ndarray, user: UserPos, params: SystemParams) -> np.ndarray:
    l_u = user.lateral_offset_m(params.waveguide_height_m)
    return np.hypot(user.x_m - xs, l_u)


def relaxed_objective(layout: PaLayout, scenario: Scenario, rho: float) -> float:
    """sum_n [rho / dist_iu + (1 - rho) / dist_eu], the phase-free surrogate."""
    iu, eu = _single_pair(scenario)
    xs = layout.as_array()
    p = scenario.params
    return float(rho * (1.0 / _distances(xs, iu, p)).sum()
                 + (1.0 - rho) * (1.0 / _distances(xs, eu, p)).sum())


def weighted_gain_objective(layout: PaLayout, scenario: Scenario, rho: float) -> float:
    """rho |sum e^{j phi_iu} / r_iu| + (1 - rho) |sum e^{j phi_eu} / r_eu|.

    Phases include both the guided and the free-space contribution, so this
    is the coherent counterpart of relaxed_objective (path-loss constant
    sqrt(eta) excluded on both sides).
    """
    iu, eu = _single_pair(scenario)
    p = scenario.params
    lam_g = p.guided_wavelength_m
    half = p.half_length_m
    sqrt_eta = math.sqrt(p.path_loss_coeff)
    total = 0.0
    for user, weight in ((iu, rho), (eu, 1.0 - rho)):
        if weight == 0.0:
            continue
        acc = 0.0 + 0.0j
        for x in layout.x_m:
            gfrac = ((x + half) / lam_g) % 1.0
            acc += free_space_entry(x, user, p) * np.exp(-1j * TWO_PI * gfrac)
        total += weight * abs(acc) / sqrt_eta
    return total


def sca_subproblem(state: ScaState, scenario: Scenario, rho: float) -> ScaState:
    """One convex-approximation step around the current iterate.

    Linearizing 1/sqrt(Y) at the current squared distances turns the iterate
    into a separable chain QP over positions; the auxiliary variables stay
    tight at the new layout.
    """
    iu, eu = _single_pair(scenario)
    p = scenario.params
    y_iu = np.asarray(state.y_iu)
    y_eu = np.asarray(state.y_eu)

    c_iu = rho / (2.0 * y_iu ** 1.5)
    c_eu = (1.0 - rho) / (2.0 * y_eu ** 1.5)
    weights = c_iu + c_eu
    targets = (c_iu * iu.x_m + c_eu * eu.x_m) / weights

    xs = solve_chain_qp(weights, targets, p.min_spacing_m,
                        -p.half_length_m, p.half_length_m)
    layout = PaLayout(tuple(xs))
    obj = relaxed_objective(layout, scenario, rho)
    return ScaState(
        layout=layout,
        y_iu=tuple(_distances(xs, iu, p) ** 2),
        y_eu=tuple(_distances(xs, eu, p) ** 2),
        iteration=state.iteration + 1,
        objective=obj,
        trace=state.trace + (obj,),
    )


def run_sca(scenario: Scenario, rho: float, eps: float = 1e-5,
            init: PaLayout | None = None, max_iters: int = 200) -> ScaState:
    """Iterate sca_subproblem until the fractional objective gain drops
    below eps. The objective trace is non-decreasing: a numerically worse
    iterate is discarded and iteration stops."""
    if not 0.0 <= rho <= 1.0:
        raise ConfigurationError(f"rho must lie in [0, 1], got {rho}")
    iu, eu = _single_pair(scenario)
    p = scenario.params
    layout = init if init is not None else uniform_layout(p)
    layout.validate(p)
    xs = layout.as_array()
    obj = relaxed_objective(layout, scenario, rho)
    state = ScaState(
        layout=layout,
        y_iu=tuple(_distances(xs, iu, p) ** 2),
        y_eu=tuple(_distances(xs, eu, p) ** 2),
        iteration=0,
        objective=obj,
        trace=(obj,),
    )
    for _ in range(max_iters):
        new = sca_subproblem(state, scenario, rho)
        if new.objective < state.objective:
            break  # floating-point wobble at convergence; keep the better iterate
        gain = new.objective - state.objective
        state = new
        if gain < eps * max(abs(state.objective), 1e-30):
            break
    return state


def _phase_slope(x: float, user: UserPos, params: SystemParams) -> float:
    """d/dx of the total phase in cycles per metre at position x."""
    l_u = user.lateral_offset_m(params.waveguide_height_m)
    s = (x - user.x_m) / math.hypot(x - user.x_m, l_u)
    return s / params.wavelength_m + 1.0 / params.guided_wavelength_m


def step_delta_x(x_from: float, scenario: Scenario, m: int = 1) -> float:
    """Spacing that advances the summed IU+EU phase by 2 pi m, linearized at
    x_from: m / [(s_iu + s_eu)/lambda + 2/lambda_g]."""
    if m < 1:
        raise ValueError("the phase step count m must be a positive integer")
    iu, eu = _single_pair(scenario)
    p = scenario.params
    denom = _phase_slope(x_from, iu, p) + _phase_slope(x_from, eu, p)
    # n_eff > 1 keeps the denominator positive for any geometry
    return m / denom


def _pick_step(base: float, coarse_x: float, direction: int, scenario: Scenario,
               rho: float, bound: float, drift_bound: float):
    """Choose the integer phase count m for the next antenna.

    Candidate positions are base + direction * m * dx1, where dx1 advances
    the summed IU+EU phase by one cycle (for interior rho) or the active
    user's phase alone (rho exactly 0 or 1, where only that user's coherence
    matters). Among steps that satisfy the spacing floor and the drift bound,
    the one with the smallest weighted per-user phase residual wins; ties go
    to the position nearest the coarse layout. Falls back to the smallest
    legal step when the drift window is empty.
    """
    iu, eu = _single_pair(scenario)
    p = scenario.params
    slope_iu = _phase_slope(base, iu, p)
    slope_eu = _phase_slope(base, eu, p)
    if rho == 1.0:
        denom = slope_iu
    elif rho == 0.0:
        denom = slope_eu
    else:
        denom = slope_iu + slope_eu
    dx1 = 1.0 / denom
    m_min = max(1, math.ceil(p.min_spacing_m / dx1 - 1e-12))

    def position(m):
        return base + direction * m * dx1

    # largest m keeping the position inside both the drift window and the range
    if direction > 0:
        room = bound - base
        drift_room = coarse_x + drift_bound - base
    else:
        room = base - bound
        drift_room = base - (coarse_x - drift_bound)
    m_cap = math.floor(min(room, drift_room) / dx1 + 1e-12)

    clamped = False
    drift_exceeded = False
    if m_cap < m_min:
        m = m_min
        pos = position(m)
        if (direction > 0 and pos > bound) or (direction < 0 and pos < bound):
            pos = bound
            clamped = True
        drift_exceeded = abs(pos - coarse_x) > drift_bound + 1e-12
        return pos, m, clamped, drift_exceeded

    best = None
    for m in range(m_min, m_cap + 1):
        # weighted per-user residual; for interior rho the IU and EU parts
        # are equal and opposite because the summed phase advances by 2 pi m
        step = m * dx1
        resid = (rho * abs(math.remainder(slope_iu * step, 1.0))
                 + (1.0 - rho) * abs(math.remainder(slope_eu * step, 1.0))) * TWO_PI
        drift = abs(position(m) - coarse_x)
        key = (round(resid, 9), drift, m)
        if best is None or key < best[0]:
            best = (key, m)
    m = best[1]
    return position(m), m, clamped, drift_exceeded


def fine_tune(coarse: PaLayout, scenario: Scenario, rho: float,
              drift_bound_m: float | None = None) -> FineTuneResult:
    """Re-space antennas outward from a reference so per-user phases align.

    The reference antenna is the coarse position with the best weighted
    reciprocal distance (lowest index on ties). Antennas to its right are
    placed at multiples of the linearized full-cycle spacing, antennas to its
    left mirror the construction; each keeps within a drift bound of its
    coarse position (default 3 wavelengths) and inside the waveguide with
    room reserved for the remaining antennas. At rho exactly 0 or 1 the
    cycle spacing tracks the active user's phase alone.
    """
    iu, eu = _single_pair(scenario)
    p = scenario.params
    n = coarse.n
    if drift_bound_m is None:
        drift_bound_m = 3.0 * p.wavelength_m

    xs = coarse.as_array()
    score = rho / _distances(xs, iu, p) + (1.0 - rho) / _distances(xs, eu, p)
    ref = int(np.argmax(score))

    out = xs.copy()
    steps = [0] * n
    clamped = False
    drift_exceeded = False
    half = p.half_length_m
    delta = p.min_spacing_m

    for i in range(ref + 1, n):
        bound = half - (n - 1 - i) * delta
        pos, m, clamp_i, drift_i = _pick_step(
            out[i - 1], xs[i], +1, scenario, rho, bound, drift_bound_m)
        out[i] = pos
        steps[i] = m
        clamped |= clamp_i
        drift_exceeded |= drift_i
    for i in range(ref - 1, -1, -1):
        bound = -half + i * delta
        pos, m, clamp_i, drift_i = _pick_step(
            out[i + 1], xs[i], -1, scenario, rho, bound, drift_bound_m)
        out[i] = pos
        steps[i] = m
        clamped |= clamp_i
        drift_exceeded |= drift_i

    layout = PaLayout(tuple(out))
    layout.validate(p)
    return FineTuneResult(layout=layout, ref_index=ref, steps=tuple(steps),
                          clamped=clamped, drift_exceeded=drift_exceeded)


def phase_residuals(layout: PaLayout, user: UserPos, params: SystemParams) -> np.ndarray:
    """Residual of one user's phase increment between neighbours, wrapped to
    the nearest multiple of 2 pi (radians, length N - 1)."""
    xs = layout.as_array()
    r = _distances(xs, user, params)
    cycles = r / params.wavelength_m + (xs + params.half_length_m) / params.guided_wavelength_m
    diffs = np.diff(cycles)
    return TWO_PI * np.array([math.remainder(d, 1.0) for d in diffs])


def summed_phase_residuals(layout: PaLayout, scenario: Scenario) -> np.ndarray:
    """Residual of the IU+EU phase increment between neighbours, wrapped to
    the nearest multiple of 2 pi. Near zero when fine-tuning with an interior
    weight succeeded."""
    iu, eu = _single_pair(scenario)
    p = scenario.params
    xs = layout.as_array()
    total_cycles = np.zeros(len(xs))
    for user in (iu, eu):
        r = _distances(xs, user, p)
        total_cycles += r / p.wavelength_m + (xs + p.half_length_m) / p.guided_wavelength_m
    diffs = np.diff(total_cycles)
    return TWO_PI * np.array([math.remainder(d, 1.0) for d in diffs])


def two_stage(scenario: Scenario, rho: float, eps: float = 1e-5,
              drift_bound_m: float | None = None) -> TwoStageResult:
    """Coarse placement followed by phase alignment; evaluates the served
    rate and harvested power of the final layout."""
    iu, eu = _single_pair(scenario)
    coarse = run_sca(scenario, rho, eps)
    fine = fine_tune(coarse.layout, scenario, rho, drift_bound_m)
    layout = fine.layout
    return TwoStageResult(
        layout=layout,
        objective=WeightedObjective(rho, weighted_gain_objective(layout, scenario, rho)),
        rate_bpshz=iu_rate_single(layout, iu, scenario.params),
        harvest_w=eu_power_single(layout, eu, scenario.params),
        coarse=coarse,
        fine=fine,
    )
