"""Optional figure rendering next to the delimited output.

The CSV stays the primary product; these helpers draw quick-look figures
for a sweep (the traced trade-off frontier) or a single run (its
convergence trace). Rendering is headless (Agg) so it works in batch jobs.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_UW = 1e6  # watts -> microwatts for display


def render_frontier(points, path: str, title: str | None = None) -> str:
    """Scatter all feasible sweep points and draw the non-dominated edge.

    Energies are displayed in microwatts; points without a finite harvest
    (runs with no EUs) are dropped from the figure.
    """
    feasible = [p for p in points
                if p.feasible and math.isfinite(p.min_energy_w)]
    infeasible = [p for p in points
                  if not p.feasible and math.isfinite(p.min_energy_w)]
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    if feasible:
        rates = [p.min_rate_bpshz for p in feasible]
        energies = [p.min_energy_w * _UW for p in feasible]
        ax.scatter(rates, energies, s=22, color="tab:blue", zorder=3,
                   label=feasible[0].label)
        edge = _nondominated(feasible)
        edge.sort(key=lambda p: p.min_rate_bpshz)
        ax.plot([p.min_rate_bpshz for p in edge],
                [p.min_energy_w * _UW for p in edge],
                color="tab:blue", alpha=0.7, zorder=2)
    if infeasible:
        ax.scatter([p.min_rate_bpshz for p in infeasible],
                   [p.min_energy_w * _UW for p in infeasible],
                   s=22, marker="x", color="tab:red", zorder=3,
                   label="infeasible")
    ax.set_xlabel("min rate (bit/s/Hz)")
    ax.set_ylabel("min harvested power (uW)")
    if title:
        ax.set_title(title)
    if feasible or infeasible:
        ax.legend(loc="best", fontsize=9)
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_trace(trace, path: str, title: str | None = None) -> str:
    """Objective value per outer iteration for one run."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    if trace:
        ax.plot(range(1, len(trace) + 1), list(trace), marker="o",
                color="tab:blue")
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("objective (bit/s/Hz)")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _nondominated(points):
    edge = []
    for p in points:
        if not any((q.min_rate_bpshz >= p.min_rate_bpshz
                    and q.min_energy_w >= p.min_energy_w)
                   and (q.min_rate_bpshz > p.min_rate_bpshz
                        or q.min_energy_w > p.min_energy_w)
                   for q in points):
            edge.append(p)
    return edge
