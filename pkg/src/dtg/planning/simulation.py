# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Kinematic team simulation of allocated routes.

Graph time steps are executed one after the other. During step ``t`` every robot whose route is on a traversal
edge follows its mid-range plan along the edge polyline with its own MPPI controller, while robots at nodes brake
and wait. A graph step ends when every moving robot has completed its edge or timed out.

All robots advance synchronously, in name order. Each one plans against the trajectories the others predicted at
the previous simulation step. Before a control is executed its next position is checked against the positions
already decided for earlier robots and the current positions of later ones; a control coming within ``r_t`` of
another robot, or entering a lethal cell, is replaced by a full brake.
"""

import json
import logging
from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np

from dtg.planning.allocation import (
    LeaderParams,
    RobotRoutes,
    Role,
    RoleKind,
    assign_roles,
    make_mid_range_plan,
)
from dtg.planning.graph import Edge, TopoGraph, is_self_loop
from dtg.planning.local_planner import (
    CostWeights,
    KinematicParams,
    MppiParams,
    MppiPlanner,
    RobotState,
    StageContext,
    dubins_step,
    map_cost,
)
from dtg.planning.rasters import CostMap, Raster

logger = logging.getLogger(__name__)

BRAKE = (0.0, 0.0)


@dataclass(frozen=True)
class SimulationParams:
    """Parameters of the team simulation.

    Args:
        kinematics (KinematicParams): Robot limits.
        mppi (MppiParams): MPPI sampling parameters.
        weights (CostWeights): Stage cost weights.
        leader (LeaderParams): Leader look-ahead along the edge.
        follow_dist (float): Arc-length spacing in a coalition, in metres.
        r_t (float): Collision radius in metres.
        r_p (float): Pointing radius in metres.
        delta_m (float): Path distance scale in metres.
        lethal (float): Lethal cost threshold.
        lethal_penalty (float): Cost per step spent in lethal cells.
        arrival_tolerance (float): Distance in metres at which a goal counts as reached.
        max_steps (int): Simulation steps allowed per graph step.
        stuck_steps (int): Steps without progress after which a robot times out.
        min_progress (float): Displacement in metres that counts as progress.
        seed (int): Random seed. Robot ``i`` uses the seed sequence ``[seed, i]``.
    """

    kinematics: KinematicParams = field(default_factory=KinematicParams)
    mppi: MppiParams = field(default_factory=lambda: MppiParams(n_samples=128, horizon=20))
    weights: CostWeights = field(default_factory=CostWeights)
    leader: LeaderParams = field(default_factory=lambda: LeaderParams(v_max=1.0, horizon=3.0))
    follow_dist: float = 3.0
    r_t: float = 0.5
    r_p: float = 1.0
    delta_m: float = 2.0
    lethal: float = 253.0
    lethal_penalty: float = 1000.0
    arrival_tolerance: float = 1.0
    max_steps: int = 600
    stuck_steps: int = 100
    min_progress: float = 0.05
    seed: int = 0


@dataclass(frozen=True)
class SimEvent:
    """Something that happened during the simulation.

    Kinds are ``arrival`` (a robot completed its edge), ``timeout`` (a robot gave up), ``brake`` (a control was
    replaced by a brake) and ``overwatch`` (robots waited at a watch node while others traversed the watched edge).
    """

    kind: str
    graph_step: int
    step: int
    robot: str | None = None
    location: Edge | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "graph_step": self.graph_step,
            "step": self.step,
            "robot": self.robot,
            "location": list(self.location) if self.location is not None else None,
            **self.detail,
        }


@dataclass(frozen=True)
class StepRecord:
    """State of one robot after one simulation step."""

    robot: str
    graph_step: int
    step: int
    state: RobotState
    location: Edge
    role: str | None
    in_cover: bool
    in_formation: bool
    overwatched: bool
    events: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "robot": self.robot,
            "graph_step": self.graph_step,
            "step": self.step,
            "x": self.state.x,
            "y": self.state.y,
            "theta": self.state.theta,
            "wheels": list(self.state.wheels),
            "location": list(self.location),
            "role": self.role,
            "in_cover": self.in_cover,
            "in_formation": self.in_formation,
            "overwatched": self.overwatched,
            "events": list(self.events),
        }


@dataclass(eq=False)
class SimulationResult:
    """Trajectories, per-step records and events of a simulation."""

    robots: tuple[str, ...]
    records: list[StepRecord] = field(default_factory=list)
    events: list[SimEvent] = field(default_factory=list)

    def trajectory(self, robot: str) -> np.ndarray:
        """``(n, 5)`` states of one robot, from its spawn state on."""
        return np.array([r.state.as_array() for r in self.records if r.robot == robot])

    @property
    def trajectories(self) -> dict[str, np.ndarray]:
        return {robot: self.trajectory(robot) for robot in self.robots}

    def events_of(self, kind: str) -> list[SimEvent]:
        return [e for e in self.events if e.kind == kind]

    def min_separation(self, robots: tuple[str, ...] | None = None) -> float:
        """Smallest distance between two of ``robots`` (default all) at the same simulation step."""
        robots = robots or self.robots
        by_step: dict[int, list[np.ndarray]] = {}
        for r in self.records:
            if r.robot in robots:
                by_step.setdefault(r.step, []).append(r.state.position)
        best = np.inf
        for positions in by_step.values():
            pts = np.array(positions)
            if len(pts) > 1:
                gaps = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
                best = min(best, float(gaps[np.triu_indices(len(pts), 1)].min()))
        return best

    def iter_jsonl(self) -> Iterator[str]:
        for record in self.records:
            yield json.dumps(record.to_dict())

    def to_jsonl(self) -> str:
        """Trajectory log, one JSON record per (robot, step)."""
        return "".join(f"{line}\n" for line in self.iter_jsonl())

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(robots={len(self.robots)}, records={len(self.records)}, "
            f"events={len(self.events)})"
        )


@dataclass(frozen=True)
class OverwatchInterval:
    graph_step: int
    watcher: int
    edge: Edge
    watchers: tuple[str, ...]
    traversing: tuple[str, ...]


def overwatch_intervals(routes: RobotRoutes, graph: TopoGraph) -> list[OverwatchInterval]:
    """Time steps at which robots wait at a watch node while others traverse the watched edge."""
    intervals = []
    for t in range(1, routes.horizon + 1):
        groups = routes.groups(t)
        for o in graph.overwatch:
            watchers = groups.get((o.watcher, o.watcher), ())
            traversing = groups.get(o.edge, ())
            if watchers and traversing:
                intervals.append(OverwatchInterval(t, o.watcher, o.edge, watchers, traversing))
    return intervals


def _first_direction(routes: RobotRoutes, graph: TopoGraph, robots: tuple[str, ...]) -> np.ndarray:
    for robot in robots:
        for loc in routes.route(robot):
            if not is_self_loop(loc):
                polyline = graph.edge_polyline(loc)
                d = polyline[min(1, len(polyline) - 1)] - polyline[0]
                if np.linalg.norm(d) > 0:
                    return d / np.linalg.norm(d)
    return np.array([1.0, 0.0])


def spawn_states(routes: RobotRoutes, graph: TopoGraph, r_t: float) -> dict[str, RobotState]:
    """Initial states: robots sharing a start location stand in a line behind it, ``2 r_t`` apart.

    The line points along the first edge the group will traverse; the first robot by name stands on the node
    (or at the start of the edge) itself.
    """
    states = {}
    for loc, members in routes.groups(1).items():
        direction = _first_direction(routes, graph, members)
        origin = graph.node_point(loc[0]) if is_self_loop(loc) else graph.edge_polyline(loc)[0]
        heading = float(np.arctan2(direction[1], direction[0]))
        for i, robot in enumerate(members):
            x, y = origin - direction * 2 * r_t * i
            states[robot] = RobotState(float(x), float(y), heading)
    return states


def _in_mask(mask: Raster | None, point: np.ndarray) -> bool:
    if mask is None or not mask.contains(point):
        return False
    return bool(mask.data[mask.cell_of(point)])


class _TeamSimulator:
    """Mutable state of one simulation run."""

    def __init__(
        self,
        routes: RobotRoutes,
        graph: TopoGraph,
        params: SimulationParams,
        cost_map: CostMap | None,
        cover: Raster | None,
    ) -> None:
        self.routes = routes
        self.graph = graph
        self.params = params
        self.cost_map = cost_map
        self.cover = cover
        self.states = spawn_states(routes, graph, params.r_t)
        self.planners = {
            robot: MppiPlanner(params.kinematics, params.mppi, seed=[params.seed, i])
            for i, robot in enumerate(routes.robots)
        }
        self.predicted = {robot: np.zeros((0, 2)) for robot in routes.robots}
        self.result = SimulationResult(robots=routes.robots)
        self.step = 0
        self._t = 1
        self._intervals = overwatch_intervals(routes, graph)

    def _lethal(self, point: np.ndarray) -> bool:
        return self.cost_map is not None and bool(map_cost(self.cost_map, point)[0] >= self.params.lethal)

    def _context(self, robot: str, plan) -> StageContext:
        p = self.params
        others = [self.predicted[o] for o in self.routes.robots if o != robot]
        others += [self.states[o].position[None, :] for o in self.routes.robots if o != robot]
        return StageContext(
            goal=plan.goal,
            goal_heading=plan.heading,
            path=plan.segment,
            cost_map=self.cost_map,
            lethal=p.lethal,
            lethal_penalty=p.lethal_penalty,
            r_p=p.r_p,
            delta_m=p.delta_m,
            r_t=p.r_t,
            neighbors=np.vstack(others) if others else np.zeros((0, 2)),
            weights=p.weights,
            horizon=p.mppi.horizon,
        )

    def _flags(self, robot: str, t: int, roles: dict[str, tuple[Edge, Role]]) -> tuple[bool, bool, bool]:
        position = self.states[robot].position
        in_cover = _in_mask(self.cover, position)
        loc = self.routes.location(robot, t)
        if is_self_loop(loc):
            return in_cover, False, False
        mates = [o for o, (edge, _) in roles.items() if edge == loc and o != robot]
        in_formation = any(
            np.linalg.norm(self.states[o].position - position) <= 2 * self.params.follow_dist for o in mates
        )
        groups = self.routes.groups(t)
        overwatched = any((o.watcher, o.watcher) in groups for o in self.graph.overwatch if o.edge == loc)
        return in_cover, in_formation, overwatched

    def _record(self, t: int, roles: dict[str, tuple[Edge, Role]], events: dict[str, list[str]]):
        for robot in self.routes.robots:
            role = roles.get(robot)
            in_cover, in_formation, overwatched = self._flags(robot, t, roles)
            self.result.records.append(
                StepRecord(
                    robot=robot,
                    graph_step=t,
                    step=self.step,
                    state=self.states[robot],
                    location=self.routes.location(robot, t),
                    role=str(role[1]) if role else None,
                    in_cover=in_cover,
                    in_formation=in_formation,
                    overwatched=overwatched,
                    events=tuple(events.get(robot, ())),
                )
            )

    def _event(self, kind: str, t: int, robot: str | None = None, location: Edge | None = None, **detail):
        self.result.events.append(SimEvent(kind, t, self.step, robot, location, detail))

    def _plans(self, roles: dict[str, tuple[Edge, Role]]) -> dict:
        plans = {}
        for edge, members in self.routes.coalitions(self._t).items():
            predecessor_goal = None
            for robot, role in assign_roles(members):
                plan = make_mid_range_plan(
                    robot,
                    role,
                    self.graph.edge_polyline(edge),
                    self.states[robot].position,
                    self.params.leader,
                    self.params.follow_dist,
                    predecessor_goal,
                )
                plans[robot] = plan
                predecessor_goal = plan.goal_arclength
        return plans

    def _completed(self, robot: str, plan, roles, done: dict[str, bool]) -> bool:
        edge, role = roles[robot]
        polyline = self.graph.edge_polyline(edge)
        position = self.states[robot].position
        if role.kind == RoleKind.LEADER:
            return bool(np.linalg.norm(position - polyline[-1]) <= self.params.arrival_tolerance)
        members = [name for name, _ in assign_roles(self.routes.coalitions(self._t)[edge])]
        predecessor = members[role.rank - 1]
        return done[predecessor] and bool(np.linalg.norm(position - plan.goal) <= self.params.arrival_tolerance)

    def run_graph_step(self, t: int):
        self._t = t
        p = self.params
        roles = {
            robot: (edge, role)
            for edge, members in self.routes.coalitions(t).items()
            for robot, role in assign_roles(members)
        }
        done = {robot: robot not in roles for robot in self.routes.robots}
        anchor = {robot: (self.states[robot].position, self.step) for robot in roles}
        for interval in (i for i in self._intervals if i.graph_step == t):
            self._event(
                "overwatch",
                t,
                location=interval.edge,
                watcher=interval.watcher,
                watchers=list(interval.watchers),
                traversing=list(interval.traversing),
            )

        for _ in range(p.max_steps):
            if all(done.values()):
                break
            self.step += 1
            plans = self._plans(roles)
            events: dict[str, list[str]] = {}
            decided: dict[str, RobotState] = {}
            for robot in self.routes.robots:
                state = self.states[robot]
                planner = self.planners[robot]
                if done[robot]:
                    candidate = dubins_step(state, BRAKE, p.kinematics)
                else:
                    controls = planner.plan(state, self._context(robot, plans[robot]))
                    candidate = dubins_step(state, controls[0], p.kinematics)

                others = [(decided.get(o) or self.states[o]).position for o in self.routes.robots if o != robot]
                unsafe = any(np.linalg.norm(candidate.position - pos) < p.r_t for pos in others)
                unsafe = unsafe or (self._lethal(candidate.position) and not self._lethal(state.position))
                if unsafe and not done[robot]:
                    candidate = dubins_step(state, BRAKE, p.kinematics)
                    events.setdefault(robot, []).append("brake")
                    self._event("brake", t, robot, self.routes.location(robot, t))
                    if any(np.linalg.norm(candidate.position - pos) < p.r_t for pos in others):
                        logger.warning(f"{robot} cannot stop outside the collision radius at step {self.step}")
                decided[robot] = candidate

            for robot, state in decided.items():
                self.states[robot] = state
                self.planners[robot].shift()
                self.predicted[robot] = self.planners[robot].predicted_trajectory(state)

            for robot in roles:
                if done[robot]:
                    continue
                edge = roles[robot][0]
                if self._completed(robot, plans[robot], roles, done):
                    done[robot] = True
                    events.setdefault(robot, []).append("arrival")
                    self._event("arrival", t, robot, edge)
                    logger.debug(f"{robot} completed {edge} at step {self.step}")
                    continue
                position = self.states[robot].position
                at_goal = np.linalg.norm(position - plans[robot].goal) <= p.arrival_tolerance
                if at_goal or np.linalg.norm(position - anchor[robot][0]) >= p.min_progress:
                    anchor[robot] = (position, self.step)
                elif self.step - anchor[robot][1] >= p.stuck_steps:
                    done[robot] = True
                    events.setdefault(robot, []).append("timeout")
                    self._event("timeout", t, robot, edge, reason="no progress")
                    logger.warning(f"{robot} made no progress on {edge} for {p.stuck_steps} steps")
            self._record(t, roles, events)

        for robot in (r for r, finished in done.items() if not finished):
            self._event("timeout", t, robot, roles[robot][0], reason="step budget")
            logger.warning(f"{robot} did not complete {roles[robot][0]} within {p.max_steps} steps")

    def run(self) -> SimulationResult:
        self._record(1, {}, {})
        for t in range(1, self.routes.horizon + 1):
            self.run_graph_step(t)
        return self.result


def simulate_team(
    routes: RobotRoutes,
    graph: TopoGraph,
    params: SimulationParams | None = None,
    cost_map: CostMap | None = None,
    cover: Raster | None = None,
) -> SimulationResult:
    """Executes allocated routes with MPPI-controlled differential-drive robots.

    Args:
        routes (RobotRoutes): Routes to execute.
        graph (TopoGraph): The graph the routes live on, with edge polylines in world coordinates.
        params (SimulationParams | None): Simulation parameters. Defaults to None (defaults).
        cost_map (CostMap | None): Static local cost map. Defaults to None (free everywhere).
        cover (Raster | None): Boolean cover mask for the ``in_cover`` flag. Defaults to None.

    Returns:
        SimulationResult: Records of every robot at every step, and the event log.
    """
    params = params or SimulationParams()
    result = _TeamSimulator(routes, graph, params, cost_map, cover).run()
    arrivals = len(result.events_of("arrival"))
    timeouts = len(result.events_of("timeout"))
    logger.info(f"Simulated {result!r}: {arrivals} edge completions, {timeouts} timeouts")
    return result
