# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Ablation of the planning model: what each cost component changes in the optimal plan.

Four variants of a scenario are solved:

=========  =============  =============  ===========
variant    overwatch      vulnerability  teaming
=========  =============  =============  ===========
plain      off            off            off
overwatch  on             off            off
vulnerable on             on             off
full       on             on             on
=========  =============  =============  ===========

Turning vulnerability off sets ``a = 1, m = 0`` on every edge, turning teaming off sets ``r = 0``. Without
overwatch, vulnerability and teaming a single robot just follows a shortest path through the time-expanded graph,
which ``shortest_path_cost`` computes independently with Dijkstra.
"""

import logging
from dataclasses import dataclass, replace
from datetime import timedelta

import networkx as nx

from dtg.planning.graph import Edge, Scenario, TopoGraph, is_self_loop, next_edge_action_set
from dtg.planning.model import OccupancySolution, build_milp
from dtg.planning.solver import BnBReport, SolveStatus, solve_milp

logger = logging.getLogger(__name__)

VARIANTS = ("plain", "overwatch", "vulnerable", "full")


def variant_instance(graph: TopoGraph, scenario: Scenario, variant: str) -> tuple[TopoGraph, Scenario]:
    """The graph and scenario with the components of ``variant`` switched on.

    Raises:
        ValueError: If the variant is unknown.
    """
    if variant not in VARIANTS:
        raise ValueError(f"Unknown ablation variant '{variant}', expected one of {VARIANTS}!")
    level = VARIANTS.index(variant)
    if level < 1:
        graph = replace(graph, overwatch=())
    params = {}
    for edge, p in scenario.edge_params.items():
        if level < 2:
            p = replace(p, a=1, m=0.0)
        if level < 3:
            p = replace(p, r=0.0)
        params[edge] = p
    return graph, replace(scenario, edge_params=params)


def shortest_path_cost(graph: TopoGraph, scenario: Scenario) -> float:
    """Optimal cost of a single robot without overwatch, vulnerability or teaming, by Dijkstra.

    The robot moves through the time-expanded graph of (location, time step) pairs. Being on edge ``e`` at step
    ``t`` costs ``max(1, w_bar_e) + time_weight * t``; waiting at a node is free.

    Raises:
        ValueError: If the scenario is not a single robot with one goal location, or the goal cannot be reached.
    """
    if scenario.n_robots != 1 or len(scenario.starts) != 1 or len(scenario.goals) > 1:
        raise ValueError("The shortest path oracle needs one robot and at most one goal location!")
    (start,) = scenario.starts
    goal = next(iter(scenario.goals), None)

    def cost(loc: Edge, t: int) -> float:
        if is_self_loop(loc):
            return 0.0
        return max(1.0, scenario.edge_params[loc].w_bar) + scenario.time_weight * t

    if scenario.horizon == 1:
        if goal not in (None, start):
            raise ValueError(f"Goal {goal} cannot be reached from {start} in 1 step!")
        return cost(start, 1)

    expanded = nx.DiGraph()
    for t in range(1, scenario.horizon):
        for loc in graph.locations:
            for nxt in next_edge_action_set(graph, loc):
                expanded.add_edge((loc, t), (nxt, t + 1), weight=cost(nxt, t + 1))
    targets = [(goal, scenario.horizon)] if goal is not None else [(loc, scenario.horizon) for loc in graph.locations]
    lengths = nx.single_source_dijkstra_path_length(expanded, (start, 1))
    reachable = [lengths[target] for target in targets if target in lengths]
    if not reachable:
        raise ValueError(f"Goal {goal} cannot be reached from {start} in {scenario.horizon} steps!")
    return cost(start, 1) + min(reachable)


@dataclass(frozen=True, eq=False)
class VariantResult:
    variant: str
    report: BnBReport
    overwatch_steps: int  # (opportunity, time step) pairs with robots watching a traversed edge
    moving_robots: int  # largest number of robots moving at one time step

    @property
    def objective(self) -> float:
        return self.report.objective

    @property
    def solution(self) -> OccupancySolution | None:
        return self.report.incumbent


def _overwatch_steps(graph: TopoGraph, solution: OccupancySolution) -> int:
    index = graph.location_index
    return sum(
        1
        for o in graph.overwatch
        for t in range(solution.horizon)
        if solution.p[index[o.edge], t] > 0 and solution.p[index[(o.watcher, o.watcher)], t] > 0
    )


def ablation_suite(
    graph: TopoGraph,
    scenario: Scenario,
    budget: float | timedelta | None = None,
    method: str = "highs",
    variants: tuple[str, ...] = VARIANTS,
) -> dict[str, VariantResult]:
    """Solves the scenario with cost components switched on one after the other.

    Args:
        graph (TopoGraph): The graph.
        scenario (Scenario): The scenario with all components.
        budget (float | timedelta | None): Time budget per solve. Defaults to None (unlimited).
        method (str): Solver backend, ``highs`` or ``bnb``. Defaults to ``highs``.
        variants (tuple[str, ...]): Variants to solve. Defaults to all four.

    Returns:
        dict[str, VariantResult]: Result per variant.
    """
    results = {}
    for variant in variants:
        g, s = variant_instance(graph, scenario, variant)
        report = solve_milp(build_milp(g, s), budget=budget, method=method)
        solution = report.incumbent
        results[variant] = VariantResult(
            variant=variant,
            report=report,
            overwatch_steps=_overwatch_steps(g, solution) if solution is not None else 0,
            moving_robots=int(solution.moving_robots().max()) if solution is not None else 0,
        )
        if report.status != SolveStatus.OPTIMAL:
            logger.warning(f"Ablation variant {variant} ended with status {report.status.value}")
        logger.info(f"Ablation variant {variant}: objective {report.objective}")
    return results


def ablation_table(results: dict[str, VariantResult]) -> list[dict]:
    """One row per variant, for reports."""
    return [
        {
            "variant": name,
            "status": r.report.status.value,
            "objective": r.objective,
            "overwatch_steps": r.overwatch_steps,
            "moving_robots": r.moving_robots,
        }
        for name, r in results.items()
    ]
