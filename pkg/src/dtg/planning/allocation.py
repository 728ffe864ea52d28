# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""From occupancy counts to robots: route allocation, coalition roles and mid-range plans.

Counts say how many robots are at each location, not which. Routes are recovered greedily: at every time step
each robot, in order, takes the first location (in location index order) that still has robots to place and
that it can reach from where it was. Flow conservation guarantees this never gets stuck.

Robots sharing an edge form a coalition. Its members are ordered by name; the first leads along the edge's
polyline and the others follow in line, each trailing the one before by a fixed arc length.
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from dtg.planning.graph import Edge, TopoGraph, is_self_loop, next_edge_action_set

logger = logging.getLogger(__name__)


def default_robot_names(n_robots: int) -> tuple[str, ...]:
    """``robot_00``, ``robot_01``, ... sorting in numeric order."""
    width = max(2, len(str(n_robots - 1)))
    return tuple(f"robot_{i:0{width}d}" for i in range(n_robots))


@dataclass(frozen=True, eq=False)
class RobotRoutes:
    """Location of every robot at every time step.

    Args:
        robots (tuple[str, ...]): Robot names.
        routes (tuple[tuple[Edge, ...], ...]): Route of each robot, one location per time step.
    """

    robots: tuple[str, ...]
    routes: tuple[tuple[Edge, ...], ...]

    @property
    def horizon(self) -> int:
        return len(self.routes[0]) if self.routes else 0

    def route(self, robot: str) -> tuple[Edge, ...]:
        return self.routes[self.robots.index(robot)]

    def location(self, robot: str, t: int) -> Edge:
        """Location of a robot at time step ``t`` (starting at 1)."""
        return self.route(robot)[t - 1]

    def occupancy(self, graph: TopoGraph) -> np.ndarray:
        """Robots per (location, time step), in location index order."""
        p = np.zeros((len(graph.locations), self.horizon), dtype=int)
        for route in self.routes:
            for t, loc in enumerate(route):
                p[graph.location_index[loc], t] += 1
        return p

    def groups(self, t: int) -> dict[Edge, tuple[str, ...]]:
        """Robots at each occupied location at time step ``t``, names sorted."""
        groups: dict[Edge, list[str]] = {}
        for robot, route in zip(self.robots, self.routes, strict=True):
            groups.setdefault(route[t - 1], []).append(robot)
        return {loc: tuple(sorted(names)) for loc, names in sorted(groups.items())}

    def coalitions(self, t: int) -> dict[Edge, tuple[str, ...]]:
        """Robots sharing each traversal edge at time step ``t``."""
        return {loc: names for loc, names in self.groups(t).items() if not is_self_loop(loc)}

    def follows_moves(self, graph: TopoGraph) -> bool:
        """Whether every consecutive pair of locations of every route is an allowed move."""
        return all(
            nxt in next_edge_action_set(graph, cur) for route in self.routes for cur, nxt in zip(route, route[1:])
        )

    def to_dict(self) -> dict:
        return {robot: [list(loc) for loc in route] for robot, route in zip(self.robots, self.routes, strict=True)}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(robots={len(self.robots)}, horizon={self.horizon})"


def allocate_routes(
    graph: TopoGraph, p: np.ndarray, starts: Sequence[Edge], names: Sequence[str] | None = None
) -> RobotRoutes:
    """Splits occupancy counts into one route per robot.

    Args:
        graph (TopoGraph): The graph.
        p (np.ndarray): Robots per (location, time step), shape ``(n_L, n_T)``.
        starts (Sequence[Edge]): Start location of every robot.
        names (Sequence[str] | None): Robot names. Defaults to None (``default_robot_names``).

    Returns:
        RobotRoutes: Routes whose aggregate counts equal ``p``.

    Raises:
        ValueError: If the number of names does not match the number of robots.
        RuntimeError: If some robot has no location left to take, which means ``p`` is not a feasible occupancy.
    """
    p = np.asarray(p, dtype=int)
    names = tuple(names) if names is not None else default_robot_names(len(starts))
    if len(names) != len(starts):
        raise ValueError(f"Got {len(names)} robot names for {len(starts)} robots!")

    remaining = p.copy()
    routes: list[list[Edge]] = []
    for start in starts:
        i = graph.location_index[start]
        if remaining[i, 0] <= 0:
            raise RuntimeError(f"Occupancy has no robot left at start location {start} at t=1!")
        remaining[i, 0] -= 1
        routes.append([start])

    for t in range(1, p.shape[1]):
        for robot, route in zip(names, routes, strict=True):
            allowed = next_edge_action_set(graph, route[-1])
            for loc in graph.locations:
                i = graph.location_index[loc]
                if remaining[i, t] > 0 and loc in allowed:
                    remaining[i, t] -= 1
                    route.append(loc)
                    break
            else:
                raise RuntimeError(f"No admissible location for {robot} at t={t + 1}: occupancy is infeasible!")

    allocated = RobotRoutes(robots=names, routes=tuple(tuple(route) for route in routes))
    logger.info(f"Allocated {allocated!r}")
    return allocated


class RoleKind(Enum):
    """Role of a robot within its coalition."""

    LEADER = "leader"
    FOLLOWER = "follower"


@dataclass(frozen=True)
class Role:
    kind: RoleKind
    rank: int = 0  # Position behind the leader, 0 for the leader

    def __str__(self) -> str:
        return self.kind.value if self.kind == RoleKind.LEADER else f"{self.kind.value}({self.rank})"


def assign_roles(coalition: Iterable[str]) -> list[tuple[str, Role]]:
    """Orders a coalition by name: the first member leads, the others follow in order.

    Raises:
        ValueError: If the coalition is empty.
    """
    members = sorted(coalition)
    if not members:
        raise ValueError("Cannot assign roles in an empty coalition!")
    return [(members[0], Role(RoleKind.LEADER))] + [
        (name, Role(RoleKind.FOLLOWER, rank)) for rank, name in enumerate(members[1:], start=1)
    ]


@dataclass(frozen=True)
class LeaderParams:
    v_max: float  # Leader speed along the path, m/s
    horizon: float  # Look-ahead time, s


@dataclass(frozen=True, eq=False)
class MidRangePlan:
    """Local goal of one robot along its edge.

    Args:
        robot (str): Robot name.
        role (Role): Role in the coalition.
        segment (np.ndarray): Part of the edge polyline between the robot's closest point and its goal.
        goal (np.ndarray): Goal point.
        goal_arclength (float): Arc length of the goal along the edge polyline.
        heading (float): Direction of the polyline at the goal, in radians.
    """

    robot: str
    role: Role
    segment: np.ndarray
    goal: np.ndarray
    goal_arclength: float
    heading: float


def arc_lengths(polyline: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex, starting at 0."""
    polyline = np.asarray(polyline, dtype=float)
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(polyline, axis=0), axis=1))])


def project_onto_polyline(polyline: np.ndarray, point: Sequence[float]) -> float:
    """Arc length of the polyline point closest to ``point``. Ties go to the smallest arc length."""
    polyline = np.asarray(polyline, dtype=float)
    point = np.asarray(point, dtype=float)
    if len(polyline) == 1:
        return 0.0
    s = arc_lengths(polyline)
    best_s, best_d = 0.0, np.inf
    for a, b, s0 in zip(polyline[:-1], polyline[1:], s[:-1], strict=True):
        d = b - a
        length2 = float(d @ d)
        u = 0.0 if length2 == 0 else float(np.clip((point - a) @ d / length2, 0.0, 1.0))
        dist = float(np.linalg.norm(a + u * d - point))
        if dist < best_d - 1e-12:
            best_s, best_d = s0 + u * np.sqrt(length2), dist
    return best_s


def point_at(polyline: np.ndarray, s: float) -> np.ndarray:
    """Point at arc length ``s``, clamped to the ends."""
    polyline = np.asarray(polyline, dtype=float)
    lengths = arc_lengths(polyline)
    s = float(np.clip(s, 0.0, lengths[-1]))
    return np.column_stack([np.interp(s, lengths, polyline[:, 0]), np.interp(s, lengths, polyline[:, 1])])[0]


def heading_at(polyline: np.ndarray, s: float) -> float:
    """Direction of the polyline segment containing arc length ``s``."""
    polyline = np.asarray(polyline, dtype=float)
    if len(polyline) < 2:
        return 0.0
    lengths = arc_lengths(polyline)
    i = int(np.clip(np.searchsorted(lengths, s, side="right") - 1, 0, len(polyline) - 2))
    dx, dy = polyline[i + 1] - polyline[i]
    return float(np.arctan2(dy, dx))


def sub_polyline(polyline: np.ndarray, s0: float, s1: float) -> np.ndarray:
    """Contiguous piece of a polyline between arc lengths ``s0 <= s1``."""
    polyline = np.asarray(polyline, dtype=float)
    lengths = arc_lengths(polyline)
    inner = polyline[(lengths > s0) & (lengths < s1)]
    return np.vstack([point_at(polyline, s0), inner, point_at(polyline, s1)])


def make_mid_range_plan(
    robot: str,
    role: Role,
    polyline: np.ndarray,
    position: Sequence[float],
    leader: LeaderParams,
    follow_dist: float,
    predecessor_goal: float | None = None,
) -> MidRangePlan:
    """Receding-horizon goal of a robot along its edge.

    The leader aims ``v_max * horizon`` ahead of its closest point on the polyline, stopping at the end. A
    follower aims ``follow_dist`` behind its predecessor's goal, not before the start.

    Args:
        robot (str): Robot name.
        role (Role): Role in the coalition.
        polyline (np.ndarray): Edge polyline, ``(k, 2)`` world points.
        position (Sequence[float]): Robot position.
        leader (LeaderParams): Leader speed and look-ahead.
        follow_dist (float): Arc-length spacing between consecutive coalition members, in metres.
        predecessor_goal (float | None): Arc length of the predecessor's goal, required for followers.

    Returns:
        MidRangePlan: The plan.

    Raises:
        ValueError: If the polyline is empty or a follower has no predecessor goal.
    """
    polyline = np.atleast_2d(np.asarray(polyline, dtype=float))
    if polyline.size == 0:
        raise ValueError(f"Empty polyline for {robot}!")
    total = arc_lengths(polyline)[-1]
    closest = project_onto_polyline(polyline, position)
    if role.kind == RoleKind.LEADER:
        goal_s = min(closest + leader.v_max * leader.horizon, total)
    else:
        if predecessor_goal is None:
            raise ValueError(f"Follower {robot} needs the goal of its predecessor!")
        goal_s = max(predecessor_goal - follow_dist, 0.0)
    segment = sub_polyline(polyline, min(closest, goal_s), max(closest, goal_s))
    return MidRangePlan(
        robot=robot,
        role=role,
        segment=segment,
        goal=point_at(polyline, goal_s),
        goal_arclength=float(goal_s),
        heading=heading_at(polyline, goal_s),
    )
