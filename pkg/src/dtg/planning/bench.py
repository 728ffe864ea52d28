# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Benchmarks of the two model formulations on random graphs.

For every edge density, team size and seed a random instance is generated (see ``random_instance``) and solved
with both the count-based MILP and the per-robot GMIP. Results are collected into an xarray Dataset whose data
variables are keyed by ``PlanMetric`` and quantified with pint.
"""

import itertools
import logging
from datetime import timedelta

import matplotlib.gridspec as gridspec
import matplotlib.pyplot as plt
import numpy as np
import xarray as xr
from matplotlib.figure import Figure

from dtg.planning.instances import random_instance
from dtg.planning.metrics import PlanMetric, n_variables, nodes_explored, objective, solve_time
from dtg.planning.model import build_gmip, build_milp
from dtg.planning.solver import SolveStatus, solve_milp

logger = logging.getLogger(__name__)

FORMULATIONS = {"milp": build_milp, "gmip": build_gmip}
BENCH_METRICS = (solve_time, n_variables, objective, nodes_explored)


def bench_suite(
    densities: tuple[float, ...] = (0.2, 0.5, 0.8),
    team_sizes: tuple[int, ...] = (1, 2, 3),
    n_nodes: int = 6,
    seeds: tuple[int, ...] = (0,),
    budget: float | timedelta | None = 60.0,
    method: str = "highs",
    max_horizon: int | None = 8,
) -> xr.Dataset:
    """Solves random instances with both formulations.

    Args:
        densities (tuple[float, ...]): Edge densities. Defaults to 20, 50 and 80 %.
        team_sizes (tuple[int, ...]): Team sizes. Defaults to 1, 2 and 3.
        n_nodes (int): Nodes per graph. Defaults to 6.
        seeds (tuple[int, ...]): Random seeds. Defaults to (0,).
        budget (float | timedelta | None): Time budget per solve. Defaults to 60 s.
        method (str): Solver backend. Defaults to ``highs``.
        max_horizon (int | None): Cap on the derived horizon. Defaults to 8.

    Returns:
        xr.Dataset: Metrics over ``formulation``, ``density``, ``n_robots`` and ``seed``.
    """
    shape = (len(FORMULATIONS), len(densities), len(team_sizes), len(seeds))
    data = {metric: np.full(shape, np.nan) for metric in BENCH_METRICS}
    for (f, name), (d, density), (n, n_robots), (s, seed) in itertools.product(
        enumerate(FORMULATIONS), enumerate(densities), enumerate(team_sizes), enumerate(seeds)
    ):
        graph, scenario = random_instance(
            n_nodes, density, n_robots, seed=seed, n_goal=n_robots, max_horizon=max_horizon
        )
        model = FORMULATIONS[name](graph, scenario)
        report = solve_milp(model, budget=budget, method=method)
        if report.status not in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE_BUDGET_HIT):
            logger.warning(f"{name} on density {density}, {n_robots} robots, seed {seed}: {report.status.value}")
        data[solve_time][f, d, n, s] = report.wall_time.total_seconds()
        data[n_variables][f, d, n, s] = model.n_variables
        data[objective][f, d, n, s] = report.objective
        data[nodes_explored][f, d, n, s] = report.nodes_explored
        logger.debug(f"{name} density={density} n_robots={n_robots} seed={seed}: {report.wall_time}")

    dims = ["formulation", "density", "n_robots", "seed"]
    stats = xr.Dataset(
        data_vars={metric: metric.quantify(data[metric], dims) for metric in data},
        coords={
            "formulation": list(FORMULATIONS),
            "density": list(densities),
            "n_robots": list(team_sizes),
            "seed": list(seeds),
        },
    )
    logger.info(f"Benchmarked {int(np.prod(shape))} solves")
    return stats


def formulation_speedup(stats: xr.Dataset, metric: PlanMetric = solve_time) -> xr.DataArray:
    """How many times faster the MILP solves than the GMIP.

    Args:
        stats (Dataset): Benchmark data.
        metric (PlanMetric): Time metric to compare. Defaults to solve time.

    Returns:
        DataArray: GMIP over MILP time, per density, team size and seed.
    Raises:
        ValueError: If metric units are not time (e.g., seconds).
    """
    if stats[metric].pint.dimensionality != "[time]":
        raise ValueError("Metric units must be time (e.g., seconds)!")
    speedup = stats[metric].sel(formulation="gmip") / stats[metric].sel(formulation="milp")
    speedup.name = "speedup"
    return speedup


def plot_bench(stats: xr.Dataset, metric: PlanMetric = solve_time, show: bool = True) -> Figure:
    """Plots solve times against team size, one line per formulation and density, with a table of model sizes.

    Args:
        stats (xr.Dataset): Benchmark data.
        metric (PlanMetric): Metric to plot. Defaults to solve time.
        show (bool): Whether to show the generated plot. Default: True.

    Returns:
        Figure: The Matplotlib figure.
    """
    fig = plt.figure(figsize=(12, 7))
    gs = gridspec.GridSpec(2, 1, height_ratios=[3, 1], hspace=0.3)
    ax = fig.add_subplot(gs[0])
    ax_tbl = fig.add_subplot(gs[1])

    values = stats[metric].pint.dequantify().mean(dim="seed")
    sizes = stats[n_variables].pint.dequantify().mean(dim="seed")
    table = [["formulation / density", *[str(n) for n in stats["n_robots"].values]]]
    for name in stats["formulation"].values:
        style = "-" if name == "milp" else "--"
        for density in stats["density"].values:
            line = values.sel(formulation=name, density=density)
            ax.plot(stats["n_robots"].values, line.values, style, marker="o", label=f"{name}, {density:.0%}")
            counts = sizes.sel(formulation=name, density=density).values
            table.append([f"{name} {density:.0%}", *[f"{v:.0f}" for v in counts]])

    ax.set_xlabel("robots")
    ax.set_ylabel(f"{metric} ({stats[metric].pint.units})")
    ax.set_yscale("log")
    ax.grid()
    ax.legend()
    ax.set_title(f"{str(metric).capitalize()} by formulation")
    ax_tbl.axis("off")
    tbl_chart = ax_tbl.table(table, bbox=(0.05, 0, 0.9, 1), cellLoc="center")
    ax_tbl.set_title("Variables")
    for i in range(len(table[0])):
        tbl_chart[(0, i)].set_text_props(weight="bold")

    if show:
        plt.show()

    return fig
