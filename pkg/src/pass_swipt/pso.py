"""Penalty-based particle swarm maximizer for antenna placement.

The swarm is updated synchronously with vectorized numpy operations and a
single PCG64 stream, so a run is reproducible from its seed alone. Infeasible
particles are not repaired in flight; spacing, range, and energy-shortfall
violations enter the fitness through large penalty weights, and the final
answer is repaired (or replaced by the best feasible visit) at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError, Scenario, SystemParams, TWO_PI, eu_powers


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 300
    max_iters: int = 300            # iterations per stage
    inertia_start: float = 0.9
    inertia_end: float = 0.1
    cognitive: float = 1.5
    social: float = 1.5
    penalty_spacing: float = 1e8    # per spacing violation
    penalty_range: float = 1e8      # per out-of-range coordinate
    penalty_energy: float = 1e8     # per watt of harvest shortfall
    max_stages: int = 4             # restart stages (schedule resets, swarm persists)
    restart_tol: float = 1e-3       # fractional gain required to start another stage


@dataclass(frozen=True)
class PsoResult:
    x: np.ndarray                   # chosen solution (repaired or best feasible)
    value: float                    # raw objective at x
    feasible: bool
    trace: tuple[float, ...]        # global best penalized fitness per iteration
    iters: int
    stages: int


class PlacementDomain:
    """Antenna x-positions on the waveguide: box [-L/2, L/2], min spacing."""

    def __init__(self, params: SystemParams, dim: int | None = None):
        self.lo = -params.half_length_m
        self.hi = params.half_length_m
        self.spacing = params.min_spacing_m
        self.dim = params.num_antennas if dim is None else dim
        self.velocity_limit = params.waveguide_length_m / 10.0
        self.init_velocity = params.guided_wavelength_m

    def repair(self, x: np.ndarray) -> np.ndarray:
        """Project rows onto the feasible chain: sort, then alternating
        max-shift/min-shift passes enforce spacing against each box edge."""
        offsets = self.spacing * np.arange(self.dim)

        def fwd(arr):
            return np.maximum.accumulate(arr - offsets, axis=-1) + offsets

        def bwd(arr):
            rev = (arr - offsets)[..., ::-1]
            return np.minimum.accumulate(rev, axis=-1)[..., ::-1] + offsets

        out = fwd(np.sort(x, axis=-1))
        out = bwd(np.minimum(out, self.hi))
        # spacing survives the last pass: the min-shift left room below hi
        return fwd(np.maximum(out, self.lo))

    def wrap(self, x: np.ndarray) -> np.ndarray:
        return x

    def initial_positions(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.repair(rng.uniform(self.lo, self.hi, size=(count, self.dim)))

    def initial_velocities(self, rng: np.random.Generator, count: int) -> np.ndarray:
        v = self.init_velocity
        return rng.uniform(-v, v, size=(count, self.dim))

    def violation_counts(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(spacing violations, out-of-range coordinates) per row."""
        gaps = np.diff(x, axis=-1)
        spacing = np.sum(gaps < self.spacing - 1e-12, axis=-1)
        box = np.sum((x < self.lo - 1e-12) | (x > self.hi + 1e-12), axis=-1)
        return spacing, box


class PhaseDomain:
    """Per-element phases for a fixed antenna array: wraps modulo 2 pi and
    has no ordering or range constraints."""

    def __init__(self, dim: int):
        self.dim = dim
        self.velocity_limit = TWO_PI / 10.0
        self.init_velocity = TWO_PI / 10.0

    def repair(self, x: np.ndarray) -> np.ndarray:
        return np.mod(x, TWO_PI)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        return np.mod(x, TWO_PI)

    def initial_positions(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(0.0, TWO_PI, size=(count, self.dim))

    def initial_velocities(self, rng: np.random.Generator, count: int) -> np.ndarray:
        v = self.init_velocity
        return rng.uniform(-v, v, size=(count, self.dim))

    def violation_counts(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        zeros = np.zeros(x.shape[0], dtype=np.int64)
        return zeros, zeros


def maximize(objective, domain, config: PsoConfig, seed,
             shortfall=None, shortfall_tol: float = 0.0) -> PsoResult:
    """Maximize objective(x) over the domain with a penalized swarm.

    objective maps positions of shape (count, dim) to raw values (count,).
    shortfall, when given, maps positions to a per-row harvest deficit in
    watts; max(0, deficit) is penalized and rows with deficit <= shortfall_tol
    count as energy-feasible.

    Stages repeat the full inertia schedule on the persisted swarm until the
    global best improves by less than restart_tol (fractional) over a stage.
    """
    rng = np.random.default_rng(seed)
    n = config.swarm_size

    def evaluate(x):
        raw = np.asarray(objective(x), dtype=float)
        sp, box = domain.violation_counts(x)
        pen = config.penalty_spacing * sp + config.penalty_range * box
        if shortfall is not None:
            deficit = np.asarray(shortfall(x), dtype=float)
            pen = pen + config.penalty_energy * np.maximum(0.0, deficit)
            ok = (sp == 0) & (box == 0) & (deficit <= shortfall_tol)
        else:
            ok = (sp == 0) & (box == 0)
        return raw, raw - pen, ok

    x = domain.initial_positions(rng, n)
    v = domain.initial_velocities(rng, n)
    raw, fit, ok = evaluate(x)

    pbest_x = x.copy()
    pbest_fit = fit.copy()
    gi = int(np.argmax(pbest_fit))
    gbest_x = pbest_x[gi].copy()
    gbest_fit = float(pbest_fit[gi])

    feas_x = None
    feas_val = -math.inf

    def note_feasible(x_now, raw_now, ok_now):
        nonlocal feas_x, feas_val
        if np.any(ok_now):
            masked = np.where(ok_now, raw_now, -np.inf)
            i = int(np.argmax(masked))
            if masked[i] > feas_val:
                feas_val = float(masked[i])
                feas_x = x_now[i].copy()

    note_feasible(x, raw, ok)

    trace = [gbest_fit]
    total_iters = 0
    stages = 0
    for _ in range(config.max_stages):
        stages += 1
        stage_start = gbest_fit
        for it in range(config.max_iters):
            if config.max_iters > 1:
                frac = it / (config.max_iters - 1)
            else:
                frac = 0.0
            inertia = config.inertia_start + (config.inertia_end - config.inertia_start) * frac
            r1 = rng.random((n, domain.dim))
            r2 = rng.random((n, domain.dim))
            v = (inertia * v
                 + config.cognitive * r1 * (pbest_x - x)
                 + config.social * r2 * (gbest_x[None, :] - x))
            np.clip(v, -domain.velocity_limit, domain.velocity_limit, out=v)
            x = domain.wrap(x + v)

            raw, fit, ok = evaluate(x)
            note_feasible(x, raw, ok)
            better = fit > pbest_fit
            pbest_fit = np.where(better, fit, pbest_fit)
            pbest_x = np.where(better[:, None], x, pbest_x)
            gi = int(np.argmax(pbest_fit))
            if pbest_fit[gi] > gbest_fit:
                gbest_fit = float(pbest_fit[gi])
                gbest_x = pbest_x[gi].copy()
            trace.append(gbest_fit)
            total_iters += 1
        gain = gbest_fit - stage_start
        if gain < config.restart_tol * max(abs(stage_start), 1e-30):
            break

    cand = domain.repair(gbest_x[None, :])[0]
    raw_c, _, ok_c = evaluate(cand[None, :])
    if bool(ok_c[0]):
        final_x, final_val, feasible = cand, float(raw_c[0]), True
    elif feas_x is not None:
        final_x, final_val, feasible = feas_x, feas_val, True
    else:
        final_x, final_val, feasible = cand, float(raw_c[0]), False
    return PsoResult(x=final_x, value=final_val, feasible=feasible,
                     trace=tuple(trace), iters=total_iters, stages=stages)


def compute_e_max(scenario: Scenario, config: PsoConfig | None = None,
                  seed=0) -> tuple[float, np.ndarray]:
    """Largest worst-EU harvest any layout can deliver, found by the swarm.

    Anchors harvest-threshold grids and quick infeasibility checks: a demand
    above this ceiling cannot be met by any placement.
    """
    if not scenario.eus:
        raise ConfigurationError("harvest ceiling is undefined without EUs")
    params = scenario.params
    domain = PlacementDomain(params)

    def objective(x):
        return eu_powers(x, scenario.eus, params).min(axis=-1)

    res = maximize(objective, domain, config or PsoConfig(), seed)
    return res.value, res.x
