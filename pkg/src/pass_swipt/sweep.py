"""Grid sweeps tracing the rate-energy trade-off, with CSV output.

One row per grid point, rows in grid order whatever the execution order.
Each point draws its seed from (master seed, 0, point index), so results
do not depend on how many workers ran the sweep. Wall-clock times are the
one nondeterministic quantity; the seconds column is therefore pinned to
0.0 and the measured times live in the .meta.json sidecar written next to
the CSV.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .baselines import con1_scenario, con1_solve, con2_e_max, con2_solve
from .config import RunConfig
from .config import eps_grid_from_ceiling
from .fdma import fdma_solve
from .model import ConfigurationError, PaLayout, Scenario, eu_power_single
from .noma import noma_solve
from .pso import PsoConfig, compute_e_max
from .results import AllocationResult, pareto_filter, revalidate
from .single_pair import two_stage
from .tdma import tdma_solve

CSV_HEADER = ("control", "type", "min_rate_bpshz", "min_energy_w",
              "feasible", "iters", "seconds", "layout_json")

EPS_GRID_NOTE = ("first point 0 (unconstrained); the rest log-spaced up to "
                 "eps_max_frac times the harvest ceiling")

_SOLVERS = {"fdma": fdma_solve, "tdma": tdma_solve, "noma": noma_solve}


@dataclass(frozen=True)
class ParetoPoint:
    """One sweep row. wall_time_s is always 0.0 (see module docstring)."""

    control: float                  # rho for single-pair, eps in watts else
    label: str                      # the CSV type column
    min_rate_bpshz: float
    min_energy_w: float
    feasible: bool
    iterations: int
    wall_time_s: float
    layouts: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class SweepResult:
    points: tuple[ParetoPoint, ...]         # grid order, every grid point
    frontier: tuple[ParetoPoint, ...]       # feasible and non-dominated
    protocol: str
    label: str
    grid: tuple[float, ...]
    e_max_w: float | None                   # None when the grid was explicit
    seconds: tuple[float, ...]              # measured per-point wall times
    notes: tuple[str, ...]                  # per-point diagnostics, "" if none


def type_label(protocol: str, ma: str) -> str:
    """CSV series tag: the pipeline name, with the resource scheme appended
    for the fixed-antenna references (con1-fdma, con2-tdma, ...)."""
    if protocol in ("con1", "con2"):
        return f"{protocol}-{ma}"
    return protocol


def _nested(layouts) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(x) for x in lay.as_array()) for lay in layouts)


def _solve_point(task, strict: bool = False):
    """Run one grid point. Failures become infeasible rows so a sweep never
    aborts; strict=True re-raises instead (single runs want the error)."""
    protocol, ma, scenario, pso, control, entropy = task
    label = type_label(protocol, ma)
    start = time.perf_counter()
    note = ""
    trace = ()
    try:
        if protocol == "single-pair":
            res = two_stage(scenario, control)
            res.layout.validate(scenario.params)
            trace = res.coarse.trace
            point = ParetoPoint(
                control=control, label=label,
                min_rate_bpshz=float(res.rate_bpshz),
                min_energy_w=float(res.harvest_w),
                feasible=True, iterations=res.coarse.iteration,
                wall_time_s=0.0,
                layouts=_nested((res.layout,)))
        else:
            seed = np.random.SeedSequence(entropy)
            if protocol in _SOLVERS:
                res = _SOLVERS[protocol](scenario, control, seed=seed,
                                         pso_cfg=pso)
                check_scn = scenario
            elif protocol == "con1":
                res = con1_solve(scenario, ma, control)
                check_scn = con1_scenario(scenario)
            elif protocol == "con2":
                res = con2_solve(scenario, ma, control, pso_cfg=pso,
                                 seed=seed)
                check_scn = scenario
            else:
                raise ConfigurationError(f"unknown pipeline {protocol!r}")
            problems = revalidate(res, check_scn, control)
            feasible = res.feasible
            if problems:
                feasible = False
                note = "revalidation: " + "; ".join(problems)
            trace = res.trace
            point = ParetoPoint(
                control=control, label=label,
                min_rate_bpshz=float(res.min_rate_bpshz),
                min_energy_w=float(res.min_energy_w),
                feasible=feasible, iterations=res.iterations,
                wall_time_s=0.0,
                layouts=_nested(res.layouts))
    except Exception as exc:  # noqa: BLE001 - a bad point must not kill the sweep
        if strict:
            raise
        note = f"{type(exc).__name__}: {exc}"
        point = ParetoPoint(control=control, label=label,
                            min_rate_bpshz=0.0, min_energy_w=0.0,
                            feasible=False, iterations=0, wall_time_s=0.0,
                            layouts=())
    return point, time.perf_counter() - start, note, trace


def harvest_ceiling(cfg: RunConfig) -> float:
    """Best worst-EU harvest the configured pipeline could ever deliver,
    used to anchor the threshold grid."""
    scenario = cfg.scenario
    if not scenario.eus:
        raise ConfigurationError(
            "an eps sweep needs EUs (or an explicit eps_w grid)")
    ceiling_seed = np.random.SeedSequence((cfg.seed, 1))
    if cfg.protocol == "con1":
        scn1 = con1_scenario(scenario)
        feed = PaLayout((-scn1.params.half_length_m,))
        return min(eu_power_single(feed, eu, scn1.params)
                   for eu in scn1.eus)
    if cfg.protocol == "con2":
        value, _ = con2_e_max(scenario, pso_cfg=cfg.pso, seed=ceiling_seed)
        return value
    value, _ = compute_e_max(scenario, cfg.pso, seed=ceiling_seed)
    return value


def sweep_grid(cfg: RunConfig) -> tuple[tuple[float, ...], float | None]:
    """The control grid for a run: rho values for single-pair, harvest
    thresholds in watts otherwise."""
    if cfg.protocol == "single-pair":
        return cfg.rho_grid, None
    if cfg.eps_grid_w is not None:
        return cfg.eps_grid_w, None
    e_max = harvest_ceiling(cfg)
    return eps_grid_from_ceiling(e_max, cfg.eps_points, cfg.eps_max_frac), e_max


def sweep_run(cfg: RunConfig) -> SweepResult:
    if cfg.protocol is None:
        raise ConfigurationError(
            "a sweep needs a protocol; set it in the [sweep] section")
    scenario = cfg.scenario
    if cfg.protocol == "single-pair" and (len(scenario.ius) != 1
                                          or len(scenario.eus) != 1):
        raise ConfigurationError(
            "a single-pair sweep serves exactly one IU and one EU; got "
            f"{len(scenario.ius)} IUs and {len(scenario.eus)} EUs")
    grid, e_max = sweep_grid(cfg)
    tasks = [(cfg.protocol, cfg.ma, scenario, cfg.pso, control,
              (cfg.seed, 0, index))
             for index, control in enumerate(grid)]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as ex:
            outcomes = list(ex.map(_solve_point, tasks))
    else:
        outcomes = [_solve_point(task) for task in tasks]
    points = tuple(point for point, _, _, _ in outcomes)
    seconds = tuple(sec for _, sec, _, _ in outcomes)
    notes = tuple(note for _, _, note, _ in outcomes)
    feasible = [p for p in points if p.feasible]
    keep = pareto_filter([(p.min_rate_bpshz, p.min_energy_w)
                          for p in feasible])
    frontier = tuple(p for p, k in zip(feasible, keep) if k)
    return SweepResult(points=points, frontier=frontier,
                       protocol=cfg.protocol,
                       label=type_label(cfg.protocol, cfg.ma),
                       grid=grid, e_max_w=e_max, seconds=seconds,
                       notes=notes)


def write_csv(points, path: str) -> None:
    """Schema: control,type,min_rate_bpshz,min_energy_w,feasible,iters,
    seconds,layout_json with LF endings; floats in shortest round-trip
    form; layouts as one quoted JSON field of nested arrays."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p in points:
            writer.writerow([
                repr(p.control), p.label,
                repr(p.min_rate_bpshz), repr(p.min_energy_w),
                "True" if p.feasible else "False",
                str(p.iterations), repr(p.wall_time_s),
                json.dumps([list(lay) for lay in p.layouts],
                           separators=(",", ":")),
            ])


def read_csv(path: str) -> tuple[ParetoPoint, ...]:
    """Inverse of write_csv; round-trips every field exactly."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ConfigurationError(
                f"{path}: expected header {','.join(CSV_HEADER)}")
        points = []
        for row in reader:
            if len(row) != len(CSV_HEADER):
                raise ConfigurationError(
                    f"{path}: row has {len(row)} fields, expected "
                    f"{len(CSV_HEADER)}")
            points.append(ParetoPoint(
                control=float(row[0]), label=row[1],
                min_rate_bpshz=float(row[2]), min_energy_w=float(row[3]),
                feasible=row[4] == "True", iterations=int(row[5]),
                wall_time_s=float(row[6]),
                layouts=tuple(tuple(float(x) for x in lay)
                              for lay in json.loads(row[7]))))
    return tuple(points)


def write_sidecar(result: SweepResult, cfg: RunConfig, path: str) -> str:
    """Run metadata next to the CSV: seeds, grids, measured wall times, and
    the grid convention, so a CSV is interpretable on its own."""
    meta = {
        "source": cfg.source,
        "seed": cfg.seed,
        "jobs": cfg.jobs,
        "protocol": result.protocol,
        "type": result.label,
        "ma": cfg.ma if result.protocol in ("con1", "con2") else None,
        "grid": list(result.grid),
        "e_max_w": result.e_max_w,
        "eps_grid_note": EPS_GRID_NOTE,
        "pso": asdict(cfg.pso) if cfg.pso is not None else None,
        "seconds": list(result.seconds),
        "notes": [n for n in result.notes if n],
        "feasible_points": sum(1 for p in result.points if p.feasible),
    }
    sidecar = path + ".meta.json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return sidecar


def frontier_dominates(outer, inner, rate_tol: float = 0.0,
                       energy_tol: float = 0.0) -> bool:
    """True when every point of `inner` is matched or beaten by some point
    of `outer` in both coordinates (rate, energy), up to the slacks."""
    for b in inner:
        if not any(a.min_rate_bpshz >= b.min_rate_bpshz - rate_tol
                   and a.min_energy_w >= b.min_energy_w - energy_tol
                   for a in outer):
            return False
    return True
