# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Dynamic topological graphs and the scenarios planned on them.

Locations
---------
A robot is always at a *location*: either a directed edge ``(j, k)`` it is traversing or a node ``v`` it waits
at. Nodes are encoded as self-loop edges ``(v, v)``, so the set of locations is simply the set of edges of the
graph, self-loops included. Locations are indexed in sorted ``(source, target)`` order; every model, allocation
and occupancy array in this package uses that index.

Moves
-----
From location ``(j, k)`` a robot may move, in one time step, to any location ``(k, l)`` leaving the head node
``k``, including the self-loop ``(k, k)``. This is the next edge action set.
"""

import logging
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

NodeId = int
Edge = tuple[NodeId, NodeId]


def is_self_loop(edge: Edge) -> bool:
    """Whether a location is a node (self-loop) rather than a traversal edge."""
    return edge[0] == edge[1]


@dataclass(frozen=True)
class OverwatchOpportunity:
    """Robots waiting at ``watcher`` reduce the cost of traversing ``edge``.

    Args:
        watcher (NodeId): Node the watching robots wait at.
        edge (Edge): Watched (non self-loop) edge.
        omega (float): Benefit of full overwatch.
        alpha (int): Number of robots giving full overwatch.
        gamma (float): Extra benefit per watching robot beyond ``alpha``.
    """

    watcher: NodeId
    edge: Edge
    omega: float
    alpha: int = 2
    gamma: float = 0.0

    def benefit(self, n_watchers: int | float) -> float:
        """Cost reduction (a nonpositive number) given by ``n_watchers`` robots at the watch node."""
        shared = -self.omega / self.alpha * n_watchers
        saturated = -self.omega - self.gamma * (n_watchers - self.alpha)
        return min(0.0, max(shared, saturated))


@dataclass(frozen=True)
class EdgeCostParams:
    """Traversal cost parameters of one edge.

    Args:
        w_bar (float): Fixed cost to traverse the edge.
        a (int): Minimum desired number of robots on the edge.
        m (float): Penalty per robot short of ``a``.
        r (float): Reward per robot beyond ``a``.
    """

    w_bar: float
    a: int = 1
    m: float = 0.0
    r: float = 0.0

    def traversal_cost(self, n_robots: int | float) -> float:
        """Piecewise traversal cost for ``n_robots > 0`` robots, before the unit floor is applied."""
        return max(self.w_bar + self.m * (self.a - n_robots), self.w_bar - self.r * (n_robots - self.a))


@dataclass(frozen=True, eq=False)
class TopoGraph:
    """A dynamic topological graph.

    Edges are stored exactly as given so that ``validate`` can report malformed graphs. Use ``TopoGraph.build``
    to add the self-loops and reverse edges of an undirected description.

    Args:
        nodes (Mapping[NodeId, tuple[float, float]]): Node coordinates in metres.
        edges (tuple[Edge, ...]): Directed edges, self-loops included.
        edge_paths (Mapping[Edge, np.ndarray]): Optional polyline (k x 2, metres) of each edge.
        overwatch (tuple[OverwatchOpportunity, ...]): Overwatch opportunities.
    """

    nodes: Mapping[NodeId, tuple[float, float]]
    edges: tuple[Edge, ...]
    edge_paths: Mapping[Edge, np.ndarray] = field(default_factory=dict)
    overwatch: tuple[OverwatchOpportunity, ...] = ()

    @classmethod
    def build(
        cls,
        nodes: Mapping[NodeId, tuple[float, float]],
        edges: Iterable[Edge],
        edge_paths: Mapping[Edge, np.ndarray] | None = None,
        overwatch: Iterable[OverwatchOpportunity] = (),
        bidirectional: bool = False,
    ) -> "TopoGraph":
        """Builds a graph, adding a self-loop to every node.

        Args:
            nodes (Mapping[NodeId, tuple[float, float]]): Node coordinates.
            edges (Iterable[Edge]): Directed edges (self-loops optional).
            edge_paths (Mapping[Edge, np.ndarray] | None): Edge polylines. Reverse edges added by
                ``bidirectional`` get the reversed polyline.
            overwatch (Iterable[OverwatchOpportunity]): Overwatch opportunities.
            bidirectional (bool): Whether to add the reverse of every edge. Defaults to False.

        Returns:
            TopoGraph: The graph, with edges sorted.
        """
        edge_set = {(int(j), int(k)) for j, k in edges}
        paths = {tuple(e): np.asarray(p, dtype=float) for e, p in (edge_paths or {}).items()}
        if bidirectional:
            for j, k in list(edge_set):
                edge_set.add((k, j))
                if (j, k) in paths and (k, j) not in paths:
                    paths[(k, j)] = paths[(j, k)][::-1]
        edge_set.update((v, v) for v in nodes)
        return cls(
            nodes={int(v): (float(x), float(y)) for v, (x, y) in sorted(nodes.items())},
            edges=tuple(sorted(edge_set)),
            edge_paths=paths,
            overwatch=tuple(overwatch),
        )

    @cached_property
    def node_ids(self) -> tuple[NodeId, ...]:
        """Sorted node ids."""
        return tuple(sorted(self.nodes))

    @cached_property
    def locations(self) -> tuple[Edge, ...]:
        """All locations (edges and self-loops) in index order."""
        return tuple(sorted(set(self.edges)))

    @cached_property
    def location_index(self) -> dict[Edge, int]:
        return {loc: i for i, loc in enumerate(self.locations)}

    @cached_property
    def traversal_edges(self) -> tuple[Edge, ...]:
        """Non self-loop edges in index order."""
        return tuple(e for e in self.locations if not is_self_loop(e))

    @cached_property
    def traversal_index(self) -> dict[Edge, int]:
        return {e: i for i, e in enumerate(self.traversal_edges)}

    @cached_property
    def out_locations(self) -> dict[NodeId, tuple[Edge, ...]]:
        """Locations leaving each node, self-loop included."""
        out: dict[NodeId, list[Edge]] = {v: [] for v in self.node_ids}
        for loc in self.locations:
            out.setdefault(loc[0], []).append(loc)
        return {v: tuple(locs) for v, locs in out.items()}

    @cached_property
    def in_locations(self) -> dict[NodeId, tuple[Edge, ...]]:
        """Locations entering each node, self-loop included."""
        into: dict[NodeId, list[Edge]] = {v: [] for v in self.node_ids}
        for loc in self.locations:
            into.setdefault(loc[1], []).append(loc)
        return {v: tuple(locs) for v, locs in into.items()}

    @cached_property
    def overwatch_by_edge(self) -> dict[Edge, tuple[int, ...]]:
        """Indices of the overwatch opportunities watching each edge."""
        by_edge: dict[Edge, list[int]] = {}
        for i, opp in enumerate(self.overwatch):
            by_edge.setdefault(opp.edge, []).append(i)
        return {e: tuple(idx) for e, idx in by_edge.items()}

    @cached_property
    def location_digraph(self) -> nx.DiGraph:
        """Directed graph over locations whose arcs are the allowed one-step moves."""
        digraph = nx.DiGraph()
        digraph.add_nodes_from(self.locations)
        for loc in self.locations:
            digraph.add_edges_from((loc, nxt) for nxt in self.out_locations.get(loc[1], ()))
        return digraph

    def node_point(self, node: NodeId) -> np.ndarray:
        return np.asarray(self.nodes[node], dtype=float)

    def edge_polyline(self, edge: Edge) -> np.ndarray:
        """Polyline of an edge, falling back to the straight segment between its nodes."""
        if edge in self.edge_paths:
            return np.asarray(self.edge_paths[edge], dtype=float)
        return np.vstack([self.node_point(edge[0]), self.node_point(edge[1])])

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(n_nodes={len(self.nodes)}, n_locations={len(self.locations)}, "
            f"n_overwatch={len(self.overwatch)})"
        )


@dataclass(frozen=True)
class Scenario:
    """A planning problem on a graph.

    Args:
        n_robots (int): Team size.
        horizon (int): Number of time steps.
        starts (Mapping[Edge, int]): Robots at each start location at the first time step.
        goals (Mapping[Edge, int]): Minimum number of robots at each goal location at the last time step.
        edge_params (Mapping[Edge, EdgeCostParams]): Cost parameters of every traversal edge.
        time_weight (float): Weight of the time cost. Defaults to 1.
    """

    n_robots: int
    horizon: int
    starts: Mapping[Edge, int]
    goals: Mapping[Edge, int] = field(default_factory=dict)
    edge_params: Mapping[Edge, EdgeCostParams] = field(default_factory=dict)
    time_weight: float = 1.0

    def start_locations(self) -> list[Edge]:
        """Start location of every robot, sorted by location (the multiset B)."""
        return [loc for loc in sorted(self.starts) for _ in range(self.starts[loc])]


@dataclass(frozen=True)
class GraphTeamState:
    """Current location of every robot of the team."""

    locations: tuple[Edge, ...]

    def occupancy(self, graph: TopoGraph) -> np.ndarray:
        """Number of robots at each location, in location index order."""
        counts = np.zeros(len(graph.locations), dtype=int)
        for loc in self.locations:
            counts[graph.location_index[loc]] += 1
        return counts

    def is_valid(self, graph: TopoGraph) -> bool:
        return all(loc in graph.location_index for loc in self.locations)

    def can_follow(self, graph: TopoGraph, previous: "GraphTeamState") -> bool:
        """Whether every robot moved from ``previous`` by an allowed action."""
        if len(previous.locations) != len(self.locations):
            return False
        return all(
            nxt in next_edge_action_set(graph, cur) for cur, nxt in zip(previous.locations, self.locations, strict=True)
        )


def next_edge_action_set(graph: TopoGraph, loc: Edge) -> frozenset[Edge]:
    """Locations reachable in one step from ``loc``.

    Args:
        graph (TopoGraph): The graph.
        loc (Edge): Current location.

    Returns:
        frozenset[Edge]: All edges leaving the head node of ``loc``, its self-loop included.

    Raises:
        ValueError: If ``loc`` is not an edge of the graph.
    """
    if loc not in graph.location_index:
        raise ValueError(f"Unknown edge {loc}!")
    return frozenset(graph.out_locations.get(loc[1], ()))


def _check_params(graph: TopoGraph, scenario: Scenario) -> list[str]:
    violations = []
    for edge in graph.traversal_edges:
        if edge not in scenario.edge_params:
            violations.append(f"missing cost parameters for edge {edge}")
    for edge, params in scenario.edge_params.items():
        if edge not in graph.location_index:
            violations.append(f"cost parameters for unknown edge {edge}")
            continue
        if is_self_loop(edge):
            continue
        if not params.w_bar > 0:
            violations.append(f"w_bar must be positive on edge {edge}")
        if params.a < 1 or int(params.a) != params.a:
            violations.append(f"a_e must be a positive integer on edge {edge}")
        if params.m < 0 or params.r < 0:
            violations.append(f"m_e and r_e must be nonnegative on edge {edge}")
        if params.m < params.r:
            violations.append(f"m_e < r_e on edge {edge}")
    return violations


def _check_overwatch(graph: TopoGraph) -> list[str]:
    violations = []
    for opp in graph.overwatch:
        if opp.watcher not in graph.nodes:
            violations.append(f"overwatch from unknown node {opp.watcher}")
        if opp.edge not in graph.location_index or is_self_loop(opp.edge):
            violations.append(f"overwatch of unknown or self-loop edge {opp.edge}")
        if not opp.omega > 0:
            violations.append(f"omega must be positive for overwatch of {opp.edge} from {opp.watcher}")
        if opp.alpha < 1 or int(opp.alpha) != opp.alpha:
            violations.append(f"alpha must be a positive integer for overwatch of {opp.edge} from {opp.watcher}")
        if opp.gamma < 0:
            violations.append(f"gamma must be nonnegative for overwatch of {opp.edge} from {opp.watcher}")
        if opp.alpha >= 1 and opp.omega / opp.alpha < opp.gamma:
            violations.append(f"omega/alpha < gamma for overwatch of {opp.edge} from {opp.watcher}")
    return violations


def _unreachable_goals(graph: TopoGraph, scenario: Scenario) -> list[Edge]:
    """Goals that too few robots can reach within the horizon."""
    digraph = graph.location_digraph
    max_moves = scenario.horizon - 1
    reach = {
        start: nx.single_source_shortest_path_length(digraph, start, cutoff=max_moves)
        for start in scenario.starts
        if start in digraph
    }
    unreachable = []
    for goal, n_goal in sorted(scenario.goals.items()):
        if goal not in digraph:
            continue
        arriving = sum(count for start, count in scenario.starts.items() if goal in reach.get(start, {}))
        if arriving < n_goal:
            logger.debug(f"Goal {goal} needs {n_goal} robot(s) but only {arriving} can arrive in {max_moves} moves")
            unreachable.append(goal)
    return unreachable


def validate(graph: TopoGraph, scenario: Scenario) -> list[str]:
    """Checks a graph and scenario against all their invariants.

    Args:
        graph (TopoGraph): The graph.
        scenario (Scenario): The scenario.

    Returns:
        list[str]: Description of every violated invariant. Empty if the pair is valid.
    """
    violations = []

    for v in graph.node_ids:
        if (v, v) not in graph.location_index:
            violations.append(f"node {v} has no self-loop")
    for edge in graph.locations:
        if edge[0] not in graph.nodes or edge[1] not in graph.nodes:
            violations.append(f"edge {edge} references an undeclared node")
    for edge, count in sorted(Counter(graph.edges).items()):
        if count > 1:
            violations.append(f"duplicate edge {edge}")
    violations.extend(_check_overwatch(graph))
    violations.extend(_check_params(graph, scenario))

    if scenario.n_robots < 1:
        violations.append("n_A must be positive")
    if scenario.horizon < 1:
        violations.append("n_T must be positive")
    if sum(scenario.starts.values()) != scenario.n_robots:
        violations.append("start counts ≠ n_A")
    if any(count < 0 for count in [*scenario.starts.values(), *scenario.goals.values()]):
        violations.append("start and goal counts must be nonnegative")
    if sum(scenario.goals.values()) > scenario.n_robots:
        violations.append("goal minima exceed n_A")
    for kind, locs in (("start", scenario.starts), ("goal", scenario.goals)):
        for loc in sorted(locs):
            if loc not in graph.location_index:
                violations.append(f"{kind} location {loc} is not a location of the graph")

    if scenario.horizon >= 1 and _unreachable_goals(graph, scenario):
        violations.append("goal unreachable in horizon")

    return violations
