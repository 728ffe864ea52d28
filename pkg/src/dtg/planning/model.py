# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Mixed-integer models of team coordination on a dynamic topological graph.

Two formulations are built from a ``(TopoGraph, Scenario)`` pair:

MILP (``build_milp``)
    For every time step ``t = 1..n_T``:

    ============  =====================================  ===========================
    variable      meaning                                domain
    ============  =====================================  ===========================
    ``p_j_k_t``   robots at location ``(j, k)``          integer in ``[0, n_A]``
    ``phi_j_k_t`` edge ``(j, k)`` is used                binary
    ``cw_j_k_t``  traversal cost of edge ``(j, k)``      continuous in ``[0, inf)``
    ``psi_t``     some robot is moving                   binary
    ``co_o_t``    benefit of overwatch opportunity o     continuous in ``(-inf, 0]``
    ============  =====================================  ===========================

    Self-loops only get a ``p`` variable. The objective sums ``time_weight * t * psi_t`` and all cost variables.
    Traversal and overwatch costs are convex piecewise-linear functions of the counts written in epigraph form,
    and every occupied edge costs at least 1.

GMIP (``build_gmip``)
    Replaces the counts by one binary ``x_i_j_k_t`` per robot, location and time step; counts become sums over
    robots. Used to cross-check the MILP.
"""

import logging
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np
import xarray as xr
from scipy import sparse

from dtg.planning.graph import Edge, Scenario, TopoGraph, is_self_loop, validate

logger = logging.getLogger(__name__)


class ModelBuildError(ValueError):
    """Raised when a model cannot be built because an input invariant is violated."""


class VariableKind(Enum):
    """Integrality of a model variable."""

    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


class Sense(Enum):
    """Sense of a linear constraint."""

    LE = "<="
    GE = ">="
    EQ = "="


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float
    ub: float
    kind: VariableKind
    priority: int = 0  # Branching priority, higher values are branched on first


@dataclass(frozen=True)
class Constraint:
    name: str
    coefficients: tuple[tuple[int, float], ...]  # (variable index, coefficient) pairs
    sense: Sense
    rhs: float


@dataclass(frozen=True)
class StandardForm:
    """Array form of a model: ``min c x`` s.t. ``a_ub x <= b_ub``, ``a_eq x = b_eq``, ``lower <= x <= upper``."""

    c: np.ndarray
    a_ub: sparse.csr_matrix
    b_ub: np.ndarray
    a_eq: sparse.csr_matrix
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integrality: np.ndarray  # 1 for integer and binary variables, 0 otherwise


@dataclass(frozen=True, eq=False)
class ModelLayout:
    """Variable indices of each variable family, as (.., time) arrays."""

    locations: tuple[Edge, ...]
    traversal_edges: tuple[Edge, ...]
    horizon: int
    phi: np.ndarray  # (n_E, n_T)
    c_trav: np.ndarray  # (n_E, n_T)
    psi: np.ndarray  # (n_T,)
    c_ow: np.ndarray  # (n_O, n_T)
    p: np.ndarray | None = None  # (n_L, n_T), counts formulation
    x: np.ndarray | None = None  # (n_A, n_L, n_T), per-robot formulation


@dataclass(frozen=True, eq=False)
class MilpModel:
    """A linear model with integrality restrictions, to be minimised.

    Models are immutable: use ``ModelBuilder`` to create them.
    """

    name: str
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[int, float], ...]
    implied_lower: Mapping[int, float] = field(default_factory=dict)  # Finite lower bounds implied by constraints
    layout: ModelLayout | None = None

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @cached_property
    def variable_index(self) -> dict[str, int]:
        return {var.name: i for i, var in enumerate(self.variables)}

    @cached_property
    def standard_form(self) -> StandardForm:
        n = self.n_variables
        c = np.zeros(n)
        for i, coef in self.objective:
            c[i] += coef

        rows_ub: list[tuple[tuple[tuple[int, float], ...], float, float]] = []
        rows_eq: list[tuple[tuple[tuple[int, float], ...], float, float]] = []
        for con in self.constraints:
            if con.sense == Sense.EQ:
                rows_eq.append((con.coefficients, 1.0, con.rhs))
            else:
                sign = 1.0 if con.sense == Sense.LE else -1.0
                rows_ub.append((con.coefficients, sign, sign * con.rhs))

        def assemble(rows) -> tuple[sparse.csr_matrix, np.ndarray]:
            data, row_idx, col_idx = [], [], []
            for r, (coefficients, sign, _) in enumerate(rows):
                for i, coef in coefficients:
                    data.append(sign * coef)
                    row_idx.append(r)
                    col_idx.append(i)
            matrix = sparse.csr_matrix((data, (row_idx, col_idx)), shape=(len(rows), n))
            return matrix, np.array([rhs for _, _, rhs in rows], dtype=float)

        a_ub, b_ub = assemble(rows_ub)
        a_eq, b_eq = assemble(rows_eq)
        return StandardForm(
            c=c,
            a_ub=a_ub,
            b_ub=b_ub,
            a_eq=a_eq,
            b_eq=b_eq,
            lower=np.array([v.lb for v in self.variables], dtype=float),
            upper=np.array([v.ub for v in self.variables], dtype=float),
            integrality=np.array([v.kind != VariableKind.CONTINUOUS for v in self.variables], dtype=int),
        )

    def relaxed(self) -> "MilpModel":
        """The same model with every integrality restriction dropped."""
        variables = tuple(replace(v, kind=VariableKind.CONTINUOUS) for v in self.variables)
        return replace(self, name=f"{self.name}_relaxed", variables=variables)

    def objective_value(self, values: np.ndarray) -> float:
        return float(self.standard_form.c @ np.asarray(values, dtype=float))

    def violations(self, values: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Bounds, integrality and constraints violated by a point.

        Args:
            values (np.ndarray): Value of every variable.
            tol (float): Absolute tolerance, scaled by the magnitude of the right-hand side. Defaults to 1e-6.

        Returns:
            list[str]: One message per violation.
        """
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_variables,):
            return [f"expected {self.n_variables} values, got {values.shape}"]
        found = []
        for var, val in zip(self.variables, values, strict=True):
            if val < var.lb - tol or val > var.ub + tol:
                found.append(f"{var.name}={val} outside [{var.lb}, {var.ub}]")
            if var.kind != VariableKind.CONTINUOUS and abs(val - round(val)) > tol:
                found.append(f"{var.name}={val} is not integral")
        for con in self.constraints:
            lhs = sum(coef * values[i] for i, coef in con.coefficients)
            slack = tol * max(1.0, abs(con.rhs))
            if (
                (con.sense == Sense.LE and lhs > con.rhs + slack)
                or (con.sense == Sense.GE and lhs < con.rhs - slack)
                or (con.sense == Sense.EQ and abs(lhs - con.rhs) > slack)
            ):
                found.append(f"{con.name}: {lhs} {con.sense.value} {con.rhs} violated")
        return found

    def is_feasible(self, values: np.ndarray, tol: float = 1e-6) -> bool:
        return not self.violations(values, tol)

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(name={self.name!r}, variables={self.n_variables}, "
            f"constraints={len(self.constraints)})"
        )


class ModelBuilder:
    """Incrementally builds a ``MilpModel``.

    Args:
        name (str): Model name.
    """

    def __init__(self, name: str) -> None:
        self.name = name
        self._variables: list[Variable] = []
        self._names: dict[str, int] = {}
        self._constraints: list[Constraint] = []
        self._objective: dict[int, float] = {}
        self._implied_lower: dict[int, float] = {}

    def add_variable(
        self,
        name: str,
        lb: float = 0.0,
        ub: float = np.inf,
        kind: VariableKind = VariableKind.CONTINUOUS,
        priority: int = 0,
        implied_lower: float | None = None,
    ) -> int:
        """Adds a variable and returns its index.

        Raises:
            ValueError: If the name is already used or the bounds are inconsistent.
        """
        if name in self._names:
            raise ValueError(f"Duplicate variable name {name}!")
        if lb > ub:
            raise ValueError(f"Variable {name} has lower bound {lb} above upper bound {ub}!")
        if kind == VariableKind.BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self._names[name] = len(self._variables)
        self._variables.append(Variable(name, float(lb), float(ub), kind, priority))
        if implied_lower is not None:
            self._implied_lower[self._names[name]] = float(implied_lower)
        return self._names[name]

    def add_constraint(
        self, name: str, terms: Mapping[int, float] | Iterable[tuple[int, float]], sense: Sense, rhs: float
    ):
        """Adds a linear constraint. Repeated variables are merged and zero coefficients dropped.

        Raises:
            ValueError: If a term references an undeclared variable.
        """
        merged: dict[int, float] = {}
        for i, coef in terms.items() if isinstance(terms, Mapping) else terms:
            if not 0 <= i < len(self._variables):
                raise ValueError(f"Constraint {name} references undeclared variable {i}!")
            merged[i] = merged.get(i, 0.0) + float(coef)
        coefficients = tuple((i, c) for i, c in sorted(merged.items()) if c != 0.0)
        self._constraints.append(Constraint(name, coefficients, sense, float(rhs)))

    def add_objective(self, index: int, coef: float):
        self._objective[index] = self._objective.get(index, 0.0) + float(coef)

    def build(self, layout: ModelLayout | None = None) -> MilpModel:
        return MilpModel(
            name=self.name,
            variables=tuple(self._variables),
            constraints=tuple(self._constraints),
            objective=tuple((i, c) for i, c in sorted(self._objective.items()) if c != 0.0),
            implied_lower=dict(self._implied_lower),
            layout=layout,
        )


def variable_count(n_locations: int, n_edges: int, n_opportunities: int, horizon: int) -> int:
    """Number of variables of ``build_milp``.

    Args:
        n_locations (int): Locations, self-loops included.
        n_edges (int): Non self-loop directed edges.
        n_opportunities (int): Overwatch opportunities.
        horizon (int): Time steps.

    Returns:
        int: ``horizon * (n_locations + 2 * n_edges + n_opportunities + 1)``.
    """
    return horizon * (n_locations + 2 * n_edges + n_opportunities + 1)


def _tag(edge: Edge) -> str:
    return f"{edge[0]}_{edge[1]}"


def _check_inputs(graph: TopoGraph, scenario: Scenario):
    violations = validate(graph, scenario)
    if violations:
        raise ModelBuildError(f"Invalid graph or scenario: {'; '.join(violations)}")


def _scaled(terms: Mapping[int, float], factor: float) -> dict[int, float]:
    return {i: factor * c for i, c in terms.items()}


def _add_cost_structure(
    builder: ModelBuilder,
    graph: TopoGraph,
    scenario: Scenario,
    count_terms: Callable[[Edge, int], dict[int, float]],
    t: int,
    aux: dict[str, np.ndarray],
):
    """Adds the auxiliary variables, objective terms and cost constraints of one time step.

    ``count_terms(loc, t)`` returns the linear expression of the number of robots at ``loc`` at time ``t``.
    """
    n_robots = scenario.n_robots
    col = t - 1
    co_floor = -sum(o.omega + o.gamma * n_robots for o in graph.overwatch)

    for e_idx, edge in enumerate(graph.traversal_edges):
        aux["phi"][e_idx, col] = builder.add_variable(f"phi_{_tag(edge)}_{t}", kind=VariableKind.BINARY)
        aux["c_trav"][e_idx, col] = builder.add_variable(f"cw_{_tag(edge)}_{t}", 0.0, np.inf)
        builder.add_objective(aux["c_trav"][e_idx, col], 1.0)
    aux["psi"][col] = builder.add_variable(f"psi_{t}", kind=VariableKind.BINARY)
    builder.add_objective(aux["psi"][col], scenario.time_weight * t)
    for o_idx in range(len(graph.overwatch)):
        aux["c_ow"][o_idx, col] = builder.add_variable(f"co_{o_idx}_{t}", -np.inf, 0.0, implied_lower=co_floor)
        builder.add_objective(aux["c_ow"][o_idx, col], 1.0)

    moving: dict[int, float] = {}
    for e_idx, edge in enumerate(graph.traversal_edges):
        params = scenario.edge_params[edge]
        phi, c_trav = int(aux["phi"][e_idx, col]), int(aux["c_trav"][e_idx, col])
        on_edge = count_terms(edge, t)
        for i, c in on_edge.items():
            moving[i] = moving.get(i, 0.0) + c

        # Perspective of the shortfall and teaming pieces
        builder.add_constraint(
            f"trav1_{_tag(edge)}_{t}",
            {c_trav: 1.0, **_scaled(on_edge, params.m), phi: -(params.w_bar + params.m * params.a)},
            Sense.GE,
            0.0,
        )
        builder.add_constraint(
            f"trav2_{_tag(edge)}_{t}",
            {c_trav: 1.0, **_scaled(on_edge, params.r), phi: -(params.w_bar + params.r * params.a)},
            Sense.GE,
            0.0,
        )
        builder.add_constraint(
            f"used_{_tag(edge)}_{t}", {phi: float(n_robots), **_scaled(on_edge, -1.0)}, Sense.GE, 0.0
        )
        floor_terms = {c_trav: 1.0, phi: -1.0}
        for o_idx in graph.overwatch_by_edge.get(edge, ()):
            floor_terms[int(aux["c_ow"][o_idx, col])] = 1.0
        builder.add_constraint(f"floor_{_tag(edge)}_{t}", floor_terms, Sense.GE, 0.0)

    for o_idx, opp in enumerate(graph.overwatch):
        c_ow = int(aux["c_ow"][o_idx, col])
        watchers = count_terms((opp.watcher, opp.watcher), t)
        on_edge = count_terms(opp.edge, t)
        slope = opp.omega / opp.alpha
        builder.add_constraint(f"ow1_{o_idx}_{t}", {c_ow: 1.0, **_scaled(watchers, slope)}, Sense.GE, 0.0)
        builder.add_constraint(
            f"ow2_{o_idx}_{t}",
            {c_ow: 1.0, **_scaled(watchers, opp.gamma)},
            Sense.GE,
            -opp.omega + opp.gamma * opp.alpha,
        )
        builder.add_constraint(f"ow3_{o_idx}_{t}", {c_ow: 1.0, **_scaled(on_edge, slope * n_robots)}, Sense.GE, 0.0)

    builder.add_constraint(
        f"time_{t}", {int(aux["psi"][col]): float(n_robots), **_scaled(moving, -1.0)}, Sense.GE, 0.0
    )
    if t == scenario.horizon:
        for goal, n_goal in sorted(scenario.goals.items()):
            builder.add_constraint(f"goal_{_tag(goal)}", count_terms(goal, t), Sense.GE, n_goal)


def _empty_aux(graph: TopoGraph, horizon: int) -> dict[str, np.ndarray]:
    n_e, n_o = len(graph.traversal_edges), len(graph.overwatch)
    return {
        "phi": np.zeros((n_e, horizon), dtype=int),
        "c_trav": np.zeros((n_e, horizon), dtype=int),
        "psi": np.zeros(horizon, dtype=int),
        "c_ow": np.zeros((n_o, horizon), dtype=int),
    }


def build_milp(graph: TopoGraph, scenario: Scenario, check: bool = True) -> MilpModel:
    """Builds the occupancy-count model.

    Args:
        graph (TopoGraph): The graph.
        scenario (Scenario): The scenario.
        check (bool): Whether to validate the inputs first. Defaults to True.

    Returns:
        MilpModel: The model, with a layout mapping variables back to locations and times.

    Raises:
        ModelBuildError: If ``check`` is set and the graph or scenario violate an invariant.
    """
    if check:
        _check_inputs(graph, scenario)

    n_robots, horizon = scenario.n_robots, scenario.horizon
    locations = graph.locations
    builder = ModelBuilder("dtg_milp")
    p = np.zeros((len(locations), horizon), dtype=int)
    aux = _empty_aux(graph, horizon)

    def count_terms(loc: Edge, t: int) -> dict[int, float]:
        return {int(p[graph.location_index[loc], t - 1]): 1.0}

    for t in range(1, horizon + 1):
        for l_idx, loc in enumerate(locations):
            p[l_idx, t - 1] = builder.add_variable(
                f"p_{_tag(loc)}_{t}", 0.0, float(n_robots), VariableKind.INTEGER, priority=1
            )
        _add_cost_structure(builder, graph, scenario, count_terms, t, aux)
        builder.add_constraint(f"pop_{t}", {int(i): 1.0 for i in p[:, t - 1]}, Sense.EQ, n_robots)
        if t == 1:
            for start, n_start in sorted(scenario.starts.items()):
                builder.add_constraint(f"start_{_tag(start)}", count_terms(start, 1), Sense.EQ, n_start)
        else:
            for v in graph.node_ids:
                terms = {int(p[graph.location_index[loc], t - 2]): 1.0 for loc in graph.in_locations[v]}
                for loc in graph.out_locations[v]:
                    i = int(p[graph.location_index[loc], t - 1])
                    terms[i] = terms.get(i, 0.0) - 1.0
                builder.add_constraint(f"flow_{v}_{t}", terms, Sense.EQ, 0.0)

    layout = ModelLayout(locations=locations, traversal_edges=graph.traversal_edges, horizon=horizon, p=p, **aux)
    model = builder.build(layout)
    logger.info(f"Built {model!r} for {graph!r}")
    return model


def build_gmip(graph: TopoGraph, scenario: Scenario, check: bool = True) -> MilpModel:
    """Builds the per-robot model with one binary per robot, location and time step.

    Robots are numbered in the order of ``Scenario.start_locations``.

    Args:
        graph (TopoGraph): The graph.
        scenario (Scenario): The scenario.
        check (bool): Whether to validate the inputs first. Defaults to True.

    Returns:
        MilpModel: The model, with a layout mapping variables back to robots, locations and times.

    Raises:
        ModelBuildError: If ``check`` is set and the graph or scenario violate an invariant.
    """
    if check:
        _check_inputs(graph, scenario)

    n_robots, horizon = scenario.n_robots, scenario.horizon
    locations = graph.locations
    builder = ModelBuilder("dtg_gmip")
    x = np.zeros((n_robots, len(locations), horizon), dtype=int)
    aux = _empty_aux(graph, horizon)

    def count_terms(loc: Edge, t: int) -> dict[int, float]:
        return {int(i): 1.0 for i in x[:, graph.location_index[loc], t - 1]}

    starts = scenario.start_locations()
    for t in range(1, horizon + 1):
        for robot in range(n_robots):
            for l_idx, loc in enumerate(locations):
                x[robot, l_idx, t - 1] = builder.add_variable(
                    f"x_{robot}_{_tag(loc)}_{t}", kind=VariableKind.BINARY, priority=1
                )
        _add_cost_structure(builder, graph, scenario, count_terms, t, aux)
        for robot in range(n_robots):
            builder.add_constraint(
                f"assign_{robot}_{t}", {int(i): 1.0 for i in x[robot, :, t - 1]}, Sense.EQ, 1.0
            )
            if t == 1:
                if robot < len(starts):
                    start_var = int(x[robot, graph.location_index[starts[robot]], 0])
                    builder.add_constraint(f"start_{robot}", {start_var: 1.0}, Sense.EQ, 1.0)
                continue
            for l_idx, loc in enumerate(locations):
                terms = {int(x[robot, l_idx, t - 1]): 1.0}
                for prev in graph.in_locations[loc[0]]:
                    terms[int(x[robot, graph.location_index[prev], t - 2])] = -1.0
                builder.add_constraint(f"move_{robot}_{_tag(loc)}_{t}", terms, Sense.LE, 0.0)

    layout = ModelLayout(locations=locations, traversal_edges=graph.traversal_edges, horizon=horizon, x=x, **aux)
    model = builder.build(layout)
    logger.info(f"Built {model!r} for {graph!r}")
    return model


def occupancy_violations(graph: TopoGraph, scenario: Scenario, p: np.ndarray) -> list[str]:
    """Start, population, flow, goal and bound violations of an occupancy array.

    Args:
        graph (TopoGraph): The graph.
        scenario (Scenario): The scenario.
        p (np.ndarray): Robots per (location, time), shape ``(n_L, n_T)``.

    Returns:
        list[str]: One message per violation.
    """
    p = np.asarray(p)
    expected = (len(graph.locations), scenario.horizon)
    if p.shape != expected:
        return [f"occupancy has shape {p.shape}, expected {expected}"]
    found = []
    if np.any(p < 0) or np.any(p != np.round(p)):
        found.append("occupancy must be nonnegative integers")
    for t in range(scenario.horizon):
        if p[:, t].sum() != scenario.n_robots:
            found.append(f"population at t={t + 1} is {p[:, t].sum()}, expected {scenario.n_robots}")
    for loc in graph.locations:
        expected_start = scenario.starts.get(loc, 0)
        if p[graph.location_index[loc], 0] != expected_start:
            found.append(f"start count at {loc} is {p[graph.location_index[loc], 0]}, expected {expected_start}")
    for goal, n_goal in scenario.goals.items():
        if goal in graph.location_index and p[graph.location_index[goal], -1] < n_goal:
            found.append(f"goal {goal} has {p[graph.location_index[goal], -1]} robots, needs {n_goal}")
    for v in graph.node_ids:
        into = [graph.location_index[loc] for loc in graph.in_locations[v]]
        out = [graph.location_index[loc] for loc in graph.out_locations[v]]
        for t in range(1, scenario.horizon):
            if p[into, t - 1].sum() != p[out, t].sum():
                found.append(f"flow through node {v} broken between t={t} and t={t + 1}")
    return found


def step_cost(graph: TopoGraph, scenario: Scenario, counts: np.ndarray, t: int) -> float:
    """Cost of one time step given the robots at each location.

    Every occupied edge costs its piecewise traversal cost (at least 0) plus the benefit of its overwatch
    opportunities, and at least 1 overall. A step with any robot on an edge adds ``time_weight * t``.

    Args:
        graph (TopoGraph): The graph.
        scenario (Scenario): The scenario.
        counts (np.ndarray): Robots per location, in location index order.
        t (int): Time step, starting at 1.

    Returns:
        float: Cost of the step.
    """
    index = graph.location_index
    cost = 0.0
    moving = False
    for edge in graph.traversal_edges:
        n_edge = counts[index[edge]]
        if n_edge <= 0:
            continue
        moving = True
        edge_cost = max(0.0, scenario.edge_params[edge].traversal_cost(n_edge))
        for o_idx in graph.overwatch_by_edge.get(edge, ()):
            opp = graph.overwatch[o_idx]
            edge_cost += opp.benefit(counts[index[(opp.watcher, opp.watcher)]])
        cost += max(1.0, edge_cost)
    if moving:
        cost += scenario.time_weight * t
    return cost


def evaluate_plan_cost(graph: TopoGraph, scenario: Scenario, p: np.ndarray) -> float:
    """Cost of an occupancy plan computed from the piecewise cost definitions.

    Args:
        graph (TopoGraph): The graph.
        scenario (Scenario): The scenario.
        p (np.ndarray): Robots per (location, time), shape ``(n_L, n_T)``.

    Returns:
        float: Total cost.

    Raises:
        ValueError: If the plan violates the start, population, flow, goal or bound constraints.
    """
    p = np.asarray(p)
    violations = occupancy_violations(graph, scenario, p)
    if violations:
        raise ValueError(f"Infeasible occupancy plan: {'; '.join(violations)}")
    return sum(step_cost(graph, scenario, p[:, t - 1], t) for t in range(1, scenario.horizon + 1))


@dataclass(frozen=True, eq=False)
class OccupancySolution:
    """Robots per location and time step, with the matching auxiliary values.

    Time columns are indexed from 0, i.e. column ``t - 1`` holds time step ``t``.
    """

    locations: tuple[Edge, ...]
    traversal_edges: tuple[Edge, ...]
    p: np.ndarray  # (n_L, n_T) integer counts
    phi: np.ndarray  # (n_E, n_T) edge used
    psi: np.ndarray  # (n_T,) any robot moving
    c_trav: np.ndarray  # (n_E, n_T) traversal cost
    c_ow: np.ndarray  # (n_O, n_T) overwatch benefit
    objective: float

    @property
    def horizon(self) -> int:
        return self.p.shape[1]

    def count(self, loc: Edge, t: int) -> int:
        """Robots at ``loc`` at time step ``t`` (starting at 1)."""
        return int(self.p[self.locations.index(loc), t - 1])

    def moving_robots(self) -> np.ndarray:
        """Robots on traversal edges at each time step."""
        mask = np.array([not is_self_loop(loc) for loc in self.locations])
        return self.p[mask].sum(axis=0)

    def check(self, graph: TopoGraph, scenario: Scenario) -> list[str]:
        """Start, population, flow and goal violations of the occupancy."""
        return occupancy_violations(graph, scenario, self.p)

    def to_dataset(self) -> xr.Dataset:
        """The solution as an xarray Dataset over locations, edges, opportunities and time steps."""
        time = np.arange(1, self.horizon + 1)
        return xr.Dataset(
            data_vars={
                "p": xr.DataArray(self.p, dims=["location", "time"]),
                "phi": xr.DataArray(self.phi, dims=["edge", "time"]),
                "c_trav": xr.DataArray(self.c_trav, dims=["edge", "time"]),
                "psi": xr.DataArray(self.psi, dims=["time"]),
                "c_ow": xr.DataArray(self.c_ow, dims=["opportunity", "time"]),
            },
            coords={
                "location": [_tag(loc) for loc in self.locations],
                "edge": [_tag(e) for e in self.traversal_edges],
                "opportunity": np.arange(self.c_ow.shape[0]),
                "time": time,
            },
            attrs={"objective": self.objective},
        )

    @classmethod
    def from_occupancy(cls, graph: TopoGraph, scenario: Scenario, p: np.ndarray) -> "OccupancySolution":
        """Builds a solution from counts alone, with the tight auxiliary values.

        Raises:
            ValueError: If the occupancy is infeasible.
        """
        p = np.asarray(p, dtype=int)
        objective = evaluate_plan_cost(graph, scenario, p)
        index = graph.location_index
        edges = graph.traversal_edges
        phi = np.zeros((len(edges), scenario.horizon), dtype=int)
        c_trav = np.zeros((len(edges), scenario.horizon))
        c_ow = np.zeros((len(graph.overwatch), scenario.horizon))
        for t in range(scenario.horizon):
            for o_idx, opp in enumerate(graph.overwatch):
                if p[index[opp.edge], t] > 0:
                    c_ow[o_idx, t] = opp.benefit(p[index[(opp.watcher, opp.watcher)], t])
            for e_idx, edge in enumerate(edges):
                n_edge = p[index[edge], t]
                if n_edge <= 0:
                    continue
                phi[e_idx, t] = 1
                c_trav[e_idx, t] = max(0.0, scenario.edge_params[edge].traversal_cost(n_edge))
                total = c_trav[e_idx, t] + sum(c_ow[o, t] for o in graph.overwatch_by_edge.get(edge, ()))
                if total < 1.0:
                    c_trav[e_idx, t] += 1.0 - total
        moving = np.array([not is_self_loop(loc) for loc in graph.locations])
        psi = (p[moving].sum(axis=0) > 0).astype(int) if moving.any() else np.zeros(scenario.horizon, dtype=int)
        return cls(graph.locations, edges, p, phi, psi, c_trav, c_ow, objective)

    @classmethod
    def from_values(cls, model: MilpModel, values: np.ndarray, objective: float | None = None) -> "OccupancySolution":
        """Reads a solution out of a model's variable values.

        Raises:
            ValueError: If the model has no layout.
        """
        layout = model.layout
        if layout is None:
            raise ValueError(f"Model {model.name} has no layout to decode a solution from!")
        values = np.asarray(values, dtype=float)
        if layout.p is not None:
            p = np.rint(values[layout.p]).astype(int)
        else:
            p = np.rint(values[layout.x]).astype(int).sum(axis=0)
        return cls(
            locations=layout.locations,
            traversal_edges=layout.traversal_edges,
            p=p,
            phi=np.rint(values[layout.phi]).astype(int),
            psi=np.rint(values[layout.psi]).astype(int),
            c_trav=values[layout.c_trav],
            c_ow=values[layout.c_ow],
            objective=model.objective_value(values) if objective is None else float(objective),
        )
