# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Solvers for ``MilpModel``.

- ``solve_lp``: the linear relaxation, solved with the HiGHS dual simplex from SciPy.
- ``solve_milp``: branch and bound over ``solve_lp`` (``method="bnb"``), or the HiGHS MILP solver
  (``method="highs"``).
- ``brute_force_solve``: exhaustive search over joint robot moves, independent of any model, for small instances.

Tolerances are fixed: feasibility 1e-7, integrality 1e-6 and optimality gap 1e-6.
"""

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass
from datetime import timedelta
from enum import Enum

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from dtg.planning.graph import Scenario, TopoGraph, is_self_loop, validate
from dtg.planning.model import MilpModel, OccupancySolution, step_cost

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6
GAP_TOL = 1e-6

# Largest instances brute_force_solve accepts
MAX_BRUTE_FORCE_NODES = 6
MAX_BRUTE_FORCE_ROBOTS = 4
MAX_BRUTE_FORCE_HORIZON = 6


class GuardrailError(ValueError):
    """Raised when an instance is too large for exhaustive search."""


class SolveStatus(Enum):
    """Outcome of a solve."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    FEASIBLE_BUDGET_HIT = "feasible_budget_hit"  # Budget ran out with an incumbent
    BUDGET_EXHAUSTED = "budget_exhausted"  # Budget ran out before any incumbent was found


@dataclass(frozen=True, eq=False)
class LpSolution:
    values: np.ndarray | None
    objective: float
    status: SolveStatus


@dataclass(frozen=True, eq=False)
class BnBReport:
    """Result of ``solve_milp``.

    Args:
        status (SolveStatus): Outcome.
        objective (float): Incumbent objective, ``inf`` if there is none.
        bound (float): Proven lower bound on the optimum.
        nodes_explored (int): Number of relaxations solved.
        wall_time (timedelta): Solve time.
        values (np.ndarray | None): Incumbent variable values.
        incumbent (OccupancySolution | None): Decoded incumbent, when the model has a layout.
    """

    status: SolveStatus
    objective: float
    bound: float
    nodes_explored: int
    wall_time: timedelta
    values: np.ndarray | None = None
    incumbent: OccupancySolution | None = None

    @property
    def gap(self) -> float:
        """Absolute gap between incumbent and bound."""
        return self.objective - self.bound


def _lower_bounds(model: MilpModel, lower: np.ndarray) -> np.ndarray:
    lower = lower.copy()
    for i, implied in model.implied_lower.items():
        if np.isinf(lower[i]):
            lower[i] = implied
    return lower


def solve_lp(model: MilpModel, lower: np.ndarray | None = None, upper: np.ndarray | None = None) -> LpSolution:
    """Solves the linear relaxation of a model. Integrality restrictions are ignored.

    Args:
        model (MilpModel): The model.
        lower (np.ndarray | None): Lower bounds overriding the model's. Defaults to None.
        upper (np.ndarray | None): Upper bounds overriding the model's. Defaults to None.

    Returns:
        LpSolution: An optimal basic solution, or an infeasible/unbounded status.

    Raises:
        RuntimeError: If the LP solver fails for numerical reasons.
    """
    form = model.standard_form
    lower = _lower_bounds(model, form.lower if lower is None else np.asarray(lower, dtype=float))
    upper = form.upper if upper is None else np.asarray(upper, dtype=float)
    if np.any(lower > upper + FEASIBILITY_TOL):
        return LpSolution(None, math.inf, SolveStatus.INFEASIBLE)

    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(up) else up) for lo, up in zip(lower, upper, strict=True)]
    has_ub, has_eq = form.a_ub.shape[0] > 0, form.a_eq.shape[0] > 0
    res = linprog(
        form.c,
        A_ub=form.a_ub if has_ub else None,
        b_ub=form.b_ub if has_ub else None,
        A_eq=form.a_eq if has_eq else None,
        b_eq=form.b_eq if has_eq else None,
        bounds=bounds,
        method="highs-ds",
        options={"primal_feasibility_tolerance": FEASIBILITY_TOL, "dual_feasibility_tolerance": FEASIBILITY_TOL},
    )
    if res.status == 0:
        return LpSolution(np.asarray(res.x, dtype=float), float(res.fun), SolveStatus.OPTIMAL)
    if res.status == 2:
        return LpSolution(None, math.inf, SolveStatus.INFEASIBLE)
    if res.status == 3:
        return LpSolution(None, -math.inf, SolveStatus.UNBOUNDED)
    raise RuntimeError(f"LP relaxation of {model.name} failed: {res.message}")


def _seconds(budget: float | timedelta | None) -> float:
    if budget is None:
        return math.inf
    return budget.total_seconds() if isinstance(budget, timedelta) else float(budget)


def _report(model, status, objective, bound, nodes, start, values) -> BnBReport:
    incumbent = None
    if values is not None and model.layout is not None:
        incumbent = OccupancySolution.from_values(model, values, objective)
    report = BnBReport(
        status=status,
        objective=objective,
        bound=bound,
        nodes_explored=nodes,
        wall_time=timedelta(seconds=time.perf_counter() - start),
        values=values,
        incumbent=incumbent,
    )
    logger.info(
        f"Solved {model.name}: status={status.value}, objective={objective}, bound={bound}, "
        f"nodes={nodes}, wall_time={report.wall_time.total_seconds():.3f}s"
    )
    return report


def _polish(model: MilpModel, values: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, float]:
    """Rounds the integer variables of an integral relaxation and re-solves for the continuous ones."""
    integer = model.standard_form.integrality.astype(bool)
    rounded = np.rint(values[integer])
    fixed_lower, fixed_upper = lower.copy(), upper.copy()
    fixed_lower[integer] = rounded
    fixed_upper[integer] = rounded
    lp = solve_lp(model, fixed_lower, fixed_upper)
    if lp.status == SolveStatus.OPTIMAL:
        return lp.values, lp.objective
    values = values.copy()
    values[integer] = rounded
    return values, model.objective_value(values)


def _branch_variable(model: MilpModel, values: np.ndarray, fractional: np.ndarray) -> int:
    """Highest priority first, then most fractional, then lowest index."""
    priority = np.array([model.variables[i].priority for i in fractional])
    candidates = fractional[priority == priority.max()]
    distance = np.abs(values[candidates] - np.floor(values[candidates]) - 0.5)
    return int(candidates[np.argmin(distance)])


def _branch_and_bound(model: MilpModel, budget: float, node_limit: int | None) -> BnBReport:
    start = time.perf_counter()
    form = model.standard_form
    integer = np.flatnonzero(form.integrality)
    sequence = itertools.count()

    incumbent_values: np.ndarray | None = None
    incumbent = math.inf
    nodes = 0
    # Nodes are (-depth, parent bound, sequence, lower, upper): deepest first, best bound among equals
    open_nodes = [(0, -math.inf, next(sequence), form.lower.copy(), form.upper.copy())]

    def pruned(bound: float) -> bool:
        return bound >= incumbent - GAP_TOL * max(1.0, abs(incumbent))

    while open_nodes:
        if time.perf_counter() - start > budget or (node_limit is not None and nodes >= node_limit):
            bound = min([incumbent] + [node[1] for node in open_nodes])
            status = SolveStatus.BUDGET_EXHAUSTED if incumbent_values is None else SolveStatus.FEASIBLE_BUDGET_HIT
            logger.warning(f"Branch and bound on {model.name} stopped by its budget after {nodes} nodes")
            return _report(model, status, incumbent, bound, nodes, start, incumbent_values)

        neg_depth, parent_bound, _, lower, upper = heapq.heappop(open_nodes)
        if pruned(parent_bound):
            continue
        lp = solve_lp(model, lower, upper)
        nodes += 1
        if lp.status == SolveStatus.INFEASIBLE:
            continue
        if lp.status == SolveStatus.UNBOUNDED:
            return _report(model, SolveStatus.UNBOUNDED, -math.inf, -math.inf, nodes, start, None)
        if pruned(lp.objective):
            continue

        values = lp.values
        fraction = np.abs(values[integer] - np.rint(values[integer]))
        fractional = integer[fraction > INTEGRALITY_TOL]
        if fractional.size == 0:
            values, objective = _polish(model, values, lower, upper)
            if objective < incumbent:
                logger.debug(f"New incumbent {objective} at node {nodes}")
                incumbent, incumbent_values = objective, values
            continue

        j = _branch_variable(model, values, fractional)
        down_upper = upper.copy()
        down_upper[j] = math.floor(values[j])
        up_lower = lower.copy()
        up_lower[j] = math.ceil(values[j])
        children = [(lower, down_upper), (up_lower, upper)]
        if values[j] - math.floor(values[j]) >= 0.5:
            children.reverse()
        for child_lower, child_upper in children:
            heapq.heappush(open_nodes, (neg_depth - 1, lp.objective, next(sequence), child_lower, child_upper))

    if incumbent_values is None:
        return _report(model, SolveStatus.INFEASIBLE, math.inf, math.inf, nodes, start, None)
    return _report(model, SolveStatus.OPTIMAL, incumbent, incumbent, nodes, start, incumbent_values)


def _highs_milp(model: MilpModel, budget: float, node_limit: int | None) -> BnBReport:
    start = time.perf_counter()
    form = model.standard_form
    constraints = []
    if form.a_ub.shape[0]:
        constraints.append(LinearConstraint(form.a_ub, -np.inf, form.b_ub))
    if form.a_eq.shape[0]:
        constraints.append(LinearConstraint(form.a_eq, form.b_eq, form.b_eq))
    options = {"mip_rel_gap": GAP_TOL}
    if not math.isinf(budget):
        options["time_limit"] = budget
    if node_limit is not None:
        options["node_limit"] = node_limit
    res = milp(
        form.c,
        integrality=form.integrality,
        bounds=Bounds(_lower_bounds(model, form.lower), form.upper),
        constraints=constraints,
        options=options,
    )
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 0:
        values = np.asarray(res.x, dtype=float)
        values[form.integrality.astype(bool)] = np.rint(values[form.integrality.astype(bool)])
        objective = float(res.fun)
        bound = float(getattr(res, "mip_dual_bound", objective) or objective)
        return _report(model, SolveStatus.OPTIMAL, objective, min(bound, objective), nodes, start, values)
    if res.status == 1:
        if res.x is None:
            return _report(model, SolveStatus.BUDGET_EXHAUSTED, math.inf, -math.inf, nodes, start, None)
        values = np.asarray(res.x, dtype=float)
        bound = float(getattr(res, "mip_dual_bound", -math.inf))
        return _report(model, SolveStatus.FEASIBLE_BUDGET_HIT, float(res.fun), bound, nodes, start, values)
    if res.status == 2:
        return _report(model, SolveStatus.INFEASIBLE, math.inf, math.inf, nodes, start, None)
    if res.status == 3:
        return _report(model, SolveStatus.UNBOUNDED, -math.inf, -math.inf, nodes, start, None)
    raise RuntimeError(f"HiGHS failed on {model.name}: {res.message}")


def solve_milp(
    model: MilpModel,
    budget: float | timedelta | None = None,
    method: str = "bnb",
    node_limit: int | None = None,
) -> BnBReport:
    """Solves a model to proven optimality, or as far as the budget allows.

    The native branch and bound branches on the fractional integer variable with the highest priority (robot
    counts before indicators), the most fractional one among those. Nodes are explored depth first, ties broken by
    the best parent bound. Bounds are changed by tightening variable bounds, never by adding rows.

    Args:
        model (MilpModel): The model.
        budget (float | timedelta | None): Wall time budget, in seconds if a float. Defaults to None (no limit).
        method (str): ``"bnb"`` for the native branch and bound or ``"highs"`` for the HiGHS MILP solver.
            Defaults to ``"bnb"``.
        node_limit (int | None): Maximum number of nodes. Defaults to None (no limit).

    Returns:
        BnBReport: Status, incumbent, bound and statistics.

    Raises:
        ValueError: If the method is unknown.
    """
    seconds = _seconds(budget)
    if method == "bnb":
        return _branch_and_bound(model, seconds, node_limit)
    if method == "highs":
        return _highs_milp(model, seconds, node_limit)
    raise ValueError(f"Unknown solver method {method!r}, expected 'bnb' or 'highs'!")


def brute_force_solve(graph: TopoGraph, scenario: Scenario) -> OccupancySolution:
    """Minimum-cost plan found by enumerating every joint move of the team.

    Step costs depend only on how many robots are at each location, so joint states are handled as sorted tuples
    of location indices and the enumeration proceeds as a forward dynamic programme over time steps. Ties are
    broken towards the lexicographically smallest state sequence.

    Args:
        graph (TopoGraph): The graph (at most 6 nodes).
        scenario (Scenario): The scenario (at most 4 robots and 6 time steps).

    Returns:
        OccupancySolution: An optimal plan.

    Raises:
        GuardrailError: If the instance is larger than the limits above.
        ValueError: If the instance is invalid or has no feasible plan.
    """
    if (
        len(graph.nodes) > MAX_BRUTE_FORCE_NODES
        or scenario.n_robots > MAX_BRUTE_FORCE_ROBOTS
        or scenario.horizon > MAX_BRUTE_FORCE_HORIZON
    ):
        raise GuardrailError(
            f"Instance with {len(graph.nodes)} nodes, {scenario.n_robots} robots and {scenario.horizon} steps is "
            f"beyond the exhaustive search limits ({MAX_BRUTE_FORCE_NODES}, {MAX_BRUTE_FORCE_ROBOTS}, "
            f"{MAX_BRUTE_FORCE_HORIZON})!"
        )
    violations = validate(graph, scenario)
    if violations:
        raise ValueError(f"Invalid graph or scenario: {'; '.join(violations)}")

    index = graph.location_index
    n_locations = len(graph.locations)
    successors = [
        tuple(index[nxt] for nxt in graph.out_locations[loc[1]]) for loc in graph.locations
    ]
    traversal = {index[e] for e in graph.traversal_edges}
    static_cost: dict[tuple[int, ...], tuple[float, bool]] = {}

    def cost_at(state: tuple[int, ...], t: int) -> float:
        if state not in static_cost:
            counts = np.bincount(state, minlength=n_locations)
            static_cost[state] = (step_cost(graph, scenario, counts, 0), any(i in traversal for i in state))
        edge_cost, moving = static_cost[state]
        return edge_cost + (scenario.time_weight * t if moving else 0.0)

    first = tuple(sorted(index[b] for b in scenario.start_locations()))
    layers: list[dict[tuple[int, ...], tuple[float, tuple[int, ...] | None]]] = [{first: (cost_at(first, 1), None)}]
    for t in range(2, scenario.horizon + 1):
        layer: dict[tuple[int, ...], tuple[float, tuple[int, ...] | None]] = {}
        for state in sorted(layers[-1]):
            cost = layers[-1][state][0]
            for nxt in sorted({tuple(sorted(moves)) for moves in itertools.product(*(successors[i] for i in state))}):
                total = cost + cost_at(nxt, t)
                if nxt not in layer or total < layer[nxt][0] - 1e-12:
                    layer[nxt] = (total, state)
        layers.append(layer)

    goals = [(index[g], n) for g, n in scenario.goals.items()]
    feasible = [s for s in sorted(layers[-1]) if all(s.count(g) >= n for g, n in goals)]
    if not feasible:
        raise ValueError("No feasible plan reaches the goals within the horizon!")
    best = min(feasible, key=lambda s: layers[-1][s][0])

    states = [best]
    for layer in reversed(layers[1:]):
        states.append(layer[states[-1]][1])
    states.reverse()
    p = np.zeros((n_locations, scenario.horizon), dtype=int)
    for t, state in enumerate(states):
        for i in state:
            p[i, t] += 1

    solution = OccupancySolution.from_occupancy(graph, scenario, p)
    moved = sum(1 for loc in graph.locations if not is_self_loop(loc) and p[index[loc]].any())
    logger.info(f"Exhaustive search on {graph!r}: objective {solution.objective}, {moved} edge(s) used")
    return solution
