"""End-to-end checks of the package's headline behavior, one verdict each.

Every test prints a single PASS/FAIL line (run with `pytest -s` to watch
them stream; without -s pytest still shows the line when a check fails).
The figure-scale solver workload is shared across several checks through
module-scoped fixtures, so the whole file costs minutes, not hours.
"""

import json
import math
import shutil
import subprocess
import time
from dataclasses import replace

import numpy as np
import pytest

from pass_swipt.baselines import con1_scenario, con1_solve, con2_solve
from pass_swipt.config import RunConfig, default_rho_grid
from pass_swipt.fdma import allocate_w_p, fdma_solve
from pass_swipt.model import (
    PaLayout,
    Scenario,
    SystemParams,
    UserPos,
    channel_power_gain,
    eu_powers,
    uniform_layout,
)
from pass_swipt.noma import allocate_alpha_sca, derive_order, noma_solve
from pass_swipt.oracles import alpha_grid, placement_grid_search, tau_grid, wp_grid
from pass_swipt.pso import PlacementDomain, PsoConfig, maximize
from pass_swipt.results import revalidate
from pass_swipt.single_pair import summed_phase_residuals, two_stage
from pass_swipt.sweep import frontier_dominates, read_csv, sweep_run
from pass_swipt.tdma import allocate_tau, slot_rate_const, tdma_solve

IU_L = UserPos(-4.0, 5.0, "IU")
IU_R = UserPos(4.0, 5.0, "IU")
EU_L = UserPos(-5.0, -3.0, "EU")
EU_R = UserPos(5.0, -3.0, "EU")

FIG = Scenario(SystemParams(), (IU_L, IU_R), (EU_L, EU_R))
EPS_W = 5e-8                      # 0.05 uW harvest floor
SEEDS = (0, 1, 2, 3, 4)
SOLVERS = {"fdma": fdma_solve, "tdma": tdma_solve, "noma": noma_solve}


def verdict(tag: str, ok: bool, detail: str) -> None:
    line = f"{tag}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def ordering_runs():
    """Four-user workload at full swarm budget: three protocols and both
    fixed-transmitter references, five seeds each."""
    start = time.perf_counter()
    runs = {"pass": {}, "con2": {}, "con1": {}}
    for name, solver in SOLVERS.items():
        runs["pass"][name] = [solver(FIG, EPS_W, seed=s) for s in SEEDS]
        runs["con1"][name] = con1_solve(FIG, name, EPS_W)
        runs["con2"][name] = [con2_solve(FIG, name, EPS_W, seed=s)
                              for s in SEEDS]
    runs["seconds"] = time.perf_counter() - start
    return runs


@pytest.fixture(scope="module")
def pair_frontiers():
    """Single-pair rate/harvest frontiers over a power and array-size grid."""
    frontiers = {}
    for power_w, n in ((1.0, 4), (10.0, 4), (1.0, 8), (10.0, 8)):
        scn = Scenario(SystemParams(total_power_w=power_w, num_antennas=n),
                       (IU_L,), (EU_R,))
        cfg = RunConfig(source="<memory>", scenario=scn,
                        protocol="single-pair", jobs=4)
        frontiers[(power_w, n)] = sweep_run(cfg).frontier
    return frontiers


class TestAcceptance:
    def test_c1_placement_tracks_millimetre_grid(self):
        worst_ratio = math.inf
        worst_secs = 0.0
        for n in (1, 2):
            scn = Scenario(SystemParams(num_antennas=n), (IU_L,), (EU_R,))
            for rho in (0.0, 0.5, 1.0):
                t0 = time.perf_counter()
                grid_val, _ = placement_grid_search(scn, rho, n, step=1e-3)
                mine = two_stage(scn, rho).objective.value
                secs = time.perf_counter() - t0
                worst_ratio = min(worst_ratio, mine / grid_val)
                worst_secs = max(worst_secs, secs)
        ok = worst_ratio >= 0.98 and worst_secs <= 600.0
        verdict("check 1, placement vs millimetre grid", ok,
                f"worst objective ratio {worst_ratio:.4f} (floor 0.98), "
                f"slowest instance {worst_secs:.0f}s (cap 600)")

    def test_c2_summed_phase_residuals_stay_small(self):
        scn = Scenario(SystemParams(num_antennas=8), (IU_L,), (EU_R,))
        worst = 0.0
        for rho in (0.25, 0.5, 0.75):
            layout = two_stage(scn, rho).layout
            worst = max(worst, float(
                np.abs(summed_phase_residuals(layout, scn)).max()))
        verdict("check 2, IU+EU phase-sum residuals at N=8", worst <= 0.15,
                f"worst neighbour residual {worst:.4f} rad (cap 0.15)")

    def test_c3_recorded_traces_never_decrease(self, ordering_runs):
        traces = []
        pair = Scenario(SystemParams(), (IU_L,), (EU_R,))
        for rho in (0.0, 0.5, 1.0):
            traces.append(two_stage(pair, rho).coarse.trace)
        swarm = maximize(
            lambda x: eu_powers(x, FIG.eus, FIG.params).min(axis=-1),
            PlacementDomain(FIG.params), PsoConfig(), seed=0)
        traces.append(swarm.trace)
        for name in SOLVERS:
            traces.extend(r.trace for r in ordering_runs["pass"][name])
            traces.extend(r.trace for r in ordering_runs["con2"][name])
            traces.append(ordering_runs["con1"][name].trace)
        drops = sum(1 for tr in traces
                    for a, b in zip(tr, tr[1:]) if b < a)
        verdict("check 3, monotone optimizer traces", drops == 0,
                f"{len(traces)} traces, {drops} decreasing steps (cap 0)")

    def test_c4_allocators_match_grid_enumeration(self):
        params = FIG.params
        # bandwidth and power splits, two users
        layout = uniform_layout(params)
        gains = np.array([channel_power_gain(layout, iu, params)
                          for iu in FIG.ius])
        sigma2 = np.array([FIG.iu_noise_w(k) for k in range(2)])
        alloc = allocate_w_p(layout, FIG)
        wp_val, _, _ = wp_grid(gains, sigma2, params, steps=1000)
        wp_dev = abs(alloc.min_rate - wp_val)

        # slot lengths, three users with per-slot layouts
        third = UserPos(0.0, 4.0, "IU")
        scn3 = Scenario(params, (IU_L, IU_R, third), FIG.eus)
        spacing = params.min_spacing_m
        slots = [PaLayout(tuple(iu.x_m + i * spacing for i in range(4)))
                 for iu in scn3.ius]
        consts = [slot_rate_const(slots[k], k, scn3) for k in range(3)]
        eu_g = np.array([[channel_power_gain(lay, eu, params)
                          for lay in slots] for eu in scn3.eus])
        tau = allocate_tau(consts, eu_g, scn3, 2e-8)
        tau_val, _ = tau_grid(consts, eu_g, params, 2e-8)
        tau_dev = abs(tau.xi - tau_val) / tau_val

        # superposed power fractions, two users, asymmetric layout
        skew = PaLayout(tuple(0.5 + i * spacing for i in range(4)))
        two_iu = Scenario(params, FIG.ius, ())
        order = derive_order(skew, two_iu)
        _, xi = allocate_alpha_sca(skew, order, two_iu)
        a_val, _ = alpha_grid(
            sorted(channel_power_gain(skew, iu, params) for iu in FIG.ius),
            tuple(sigma2), params)
        a_dev = abs(xi - a_val)

        ok = wp_dev <= 2e-3 and tau_dev <= 1e-4 and a_dev <= 1e-3
        verdict("check 4, exact allocators vs grid enumeration", ok,
                f"bandwidth/power dev {wp_dev:.2e} (cap 2e-3), "
                f"slot-length dev {tau_dev:.2e} rel (cap 1e-4), "
                f"power-fraction dev {a_dev:.2e} (cap 1e-3)")

    def test_c5_feasible_results_survive_revalidation(self, ordering_runs):
        checked = 0
        problems = []
        for name in SOLVERS:
            for res in ordering_runs["pass"][name]:
                problems += revalidate(res, FIG, EPS_W)
                checked += 1
            for res in ordering_runs["con2"][name]:
                problems += revalidate(res, FIG, EPS_W)
                checked += 1
            res = ordering_runs["con1"][name]
            problems += revalidate(res, con1_scenario(FIG), EPS_W)
            checked += 1
        verdict("check 5, independent feasibility revalidation",
                not problems,
                f"{checked} results rechecked, "
                f"{len(problems)} violations: {problems[:3]}")

    def test_c6_protocol_and_reference_ordering(self, ordering_runs):
        avg = {name: float(np.mean([r.min_rate_bpshz
                                    for r in ordering_runs["pass"][name]]))
               for name in SOLVERS}
        con1 = {name: ordering_runs["con1"][name].min_rate_bpshz
                for name in SOLVERS}
        con2 = {name: float(np.mean([r.min_rate_bpshz
                                     for r in ordering_runs["con2"][name]]))
                for name in SOLVERS}
        secs = ordering_runs["seconds"]
        order_ok = (avg["tdma"] >= 0.98 * avg["noma"]
                    and avg["noma"] >= 0.98 * avg["fdma"])
        beats_refs = all(avg[n] > con1[n] and avg[n] > con2[n]
                         for n in SOLVERS)
        ok = order_ok and beats_refs and secs <= 1800.0
        verdict("check 6, protocol ordering and reference gap", ok,
                f"tdma {avg['tdma']:.3f} >= noma {avg['noma']:.3f} >= "
                f"fdma {avg['fdma']:.3f} bit/s/Hz (2% slack); "
                f"fixed refs below by >= "
                f"{min(avg[n] - max(con1[n], con2[n]) for n in SOLVERS):.2f}; "
                f"{secs:.0f}s (cap 1800)")

    def test_c7_regions_nest_with_power_and_antennas(self, pair_frontiers):
        f = pair_frontiers
        pairs = [((10.0, 4), (1.0, 4)), ((10.0, 8), (1.0, 8)),
                 ((1.0, 8), (1.0, 4)), ((10.0, 8), (10.0, 4)),
                 ((10.0, 8), (1.0, 4))]
        failures = [f"{big}>={small}" for big, small in pairs
                    if not frontier_dominates(f[big], f[small])]
        verdict("check 7, frontier nesting in power and array size",
                not failures,
                f"{len(pairs) - len(failures)}/{len(pairs)} containments "
                f"hold{'' if not failures else ': missing ' + ', '.join(failures)}")

    def test_c8_alternation_settles_quickly(self, ordering_runs):
        counts = [r.iterations for name in SOLVERS
                  for r in ordering_runs["pass"][name]]
        verdict("check 8, alternating rounds stay bounded",
                max(counts) <= 15,
                f"max outer rounds {max(counts)} (cap 15), "
                f"mean {np.mean(counts):.1f}")

    def test_c9_worker_count_never_changes_bytes(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text(
            "[ius]\niu1 = -4, 5\niu2 = 4, 5\n\n"
            "[eus]\neu1 = -5, -3\neu2 = 5, -3\n\n"
            "[sweep]\nprotocol = fdma\neps_points = 3\n")
        exe = shutil.which("pass-swipt")
        outs = []
        for jobs in (1, 8):
            out = tmp_path / f"jobs{jobs}.csv"
            proc = subprocess.run(
                [exe, "sweep", "--config", str(ini), "--seed", "7",
                 "--out", str(out), "--jobs", str(jobs)],
                capture_output=True, text=True, timeout=600)
            assert proc.returncode == 0, proc.stderr
            outs.append(out.read_bytes())
        same = outs[0] == outs[1]
        rows = read_csv(str(tmp_path / "jobs1.csv"))
        verdict("check 9, reruns are byte-identical across workers",
                same and len(rows) == 3,
                f"{len(outs[0])} CSV bytes, jobs 1 vs 8 "
                f"{'identical' if same else 'DIFFER'}")
