# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Low-level motion planning: differential-drive kinematics, stage costs and MPPI.

States are handled in batches as ``(K, 5)`` arrays of ``[x, y, theta, w_right, w_left]`` so that all MPPI
rollouts advance together. Controls are ``[v, omega]`` (linear and angular velocity).

Stage cost components
---------------------
goal
    Distance to the goal point.
heading
    ``exp(((p_d - p) / 2 . [cos th_d, sin th_d])^2) * min(-cos(th_d - th), 0.9)``. Rewards facing the goal heading,
    more so further away along it. The exponent is capped at ``MAX_EXPONENT``.
pointing
    Within ``r_p`` of the goal, ``max(-cos(atan2(p_d - p) - th_d), 0)``; zero at the goal itself.
path_distance
    ``min(d_m / delta_m, 1)^2`` for the distance ``d_m`` to the mid-range path.
path_heading
    ``1 - (dp / |dp|) . [cos th_m, sin th_m]`` for the step ``dp``; zero for a robot that did not move.
costmap
    ``LETHAL_COST`` on entering a lethal cell or ending the horizon in one, ``lethal_penalty`` while staying in
    lethal cells, ``C / lethal`` otherwise. Positions outside the map are lethal (cost 255).
collision
    ``LETHAL_COST`` when a trajectory point of another robot is closer than ``r_t``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from dtg.planning.rasters import CostMap

logger = logging.getLogger(__name__)

LETHAL_COST = 1e10
MAX_EXPONENT = 50.0
OUTSIDE_COST = 255.0


def wrap_angle(theta: np.ndarray | float) -> np.ndarray | float:
    """Wraps angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, 2 * np.pi)


@dataclass(frozen=True)
class KinematicParams:
    """Differential-drive limits.

    Args:
        wheel_radius (float): Wheel radius r in metres.
        wheel_base (float): Distance b between the wheels in metres.
        v_min (float): Minimum wheel rim speed in m/s.
        v_max (float): Maximum wheel rim speed in m/s.
        a_max (float): Maximum wheel rim acceleration in m/s^2.
        dt (float): Time step in seconds.

    Raises:
        ValueError: If a limit is inconsistent.
    """

    wheel_radius: float = 0.3
    wheel_base: float = 0.8
    v_min: float = -0.5
    v_max: float = 1.5
    a_max: float = 3.0
    dt: float = 0.1

    def __post_init__(self):
        if min(self.wheel_radius, self.wheel_base, self.dt) <= 0:
            raise ValueError("Wheel radius, wheel base and time step must be positive!")
        if self.v_min > self.v_max:
            raise ValueError(f"v_min {self.v_min} exceeds v_max {self.v_max}!")
        if self.a_max < 0:
            raise ValueError(f"a_max must be nonnegative, got {self.a_max}!")


@dataclass(frozen=True)
class RobotState:
    """Pose and previous wheel speeds of one robot.

    The acceleration limit takes precedence over the speed limits. A robot whose previous wheel speeds lie outside
    ``[v_min / r, v_max / r]``, such as one starting at rest when ``v_min > 0``, is brought into range by at most
    ``a_max / r * dt`` per step and may stay out of range for the first few steps.
    """

    x: float
    y: float
    theta: float
    wheels: tuple[float, float] = (0.0, 0.0)  # Previous (right, left) wheel speeds, rad/s

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, *self.wheels], dtype=float)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "RobotState":
        x, y, theta, w_right, w_left = (float(v) for v in values)
        return cls(x, y, theta, (w_right, w_left))


def step_batch(states: np.ndarray, controls: np.ndarray, k: KinematicParams) -> np.ndarray:
    """Advances a batch of states by one time step.

    Args:
        states (np.ndarray): ``(K, 5)`` states.
        controls (np.ndarray): ``(K, 2)`` controls ``[v, omega]``.
        k (KinematicParams): Limits.

    Returns:
        np.ndarray: ``(K, 5)`` next states, holding the applied wheel speeds.
    """
    r, b, dt = k.wheel_radius, k.wheel_base, k.dt
    v, omega = controls[:, 0], controls[:, 1]
    requested = np.column_stack([v / r + b * omega / (2 * r), v / r - b * omega / (2 * r)])
    previous = states[:, 3:5]
    step = k.a_max / r * dt
    upper = np.maximum(np.maximum(requested, k.v_min / r), previous - step)
    wheels = np.minimum(np.minimum(upper, k.v_max / r), previous + step)

    speed = r / 2 * (wheels[:, 0] + wheels[:, 1])
    turn = r / b * (wheels[:, 0] - wheels[:, 1])
    theta = states[:, 2]
    return np.column_stack(
        [
            states[:, 0] + np.cos(theta) * speed * dt,
            states[:, 1] + np.sin(theta) * speed * dt,
            wrap_angle(theta + turn * dt),
            wheels,
        ]
    )


def dubins_step(state: RobotState, control, k: KinematicParams) -> RobotState:
    """Advances one robot by one time step with clamped wheel speeds and accelerations."""
    nxt = step_batch(state.as_array()[None, :], np.asarray(control, dtype=float).reshape(1, 2), k)
    return RobotState.from_array(nxt[0])


@dataclass(frozen=True)
class CostWeights:
    goal: float = 1.0
    heading: float = 1e-3
    pointing: float = 1.0
    path_distance: float = 1.0
    path_heading: float = 1.0
    costmap: float = 1.0
    collision: float = 1.0


@dataclass(frozen=True, eq=False)
class StageContext:
    """Everything the stage cost of one robot depends on besides its own state.

    Args:
        goal (np.ndarray): Goal position.
        goal_heading (float): Goal heading in radians.
        path (np.ndarray): Mid-range path, ``(m, 2)`` world points.
        cost_map (CostMap | None): Local cost map. Defaults to None (free everywhere).
        lethal (float): Lethal cost threshold in (0, 255]. Defaults to 253.
        lethal_penalty (float): Cost per step spent in lethal cells. Defaults to 1000.
        r_p (float): Pointing radius in metres. Defaults to 1.
        delta_m (float): Path distance scale in metres. Defaults to 2.
        r_t (float): Collision radius in metres. Defaults to 0.5.
        neighbors (np.ndarray): ``(n, 2)`` trajectory points of other robots. Defaults to none.
        weights (CostWeights): Component weights.
        horizon (int): Planning horizon in steps, for the terminal lethal case. Defaults to 30.
    """

    goal: np.ndarray
    goal_heading: float
    path: np.ndarray
    cost_map: CostMap | None = None
    lethal: float = 253.0
    lethal_penalty: float = 1000.0
    r_p: float = 1.0
    delta_m: float = 2.0
    r_t: float = 0.5
    neighbors: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    weights: CostWeights = field(default_factory=CostWeights)
    horizon: int = 30

    def __post_init__(self):
        if not 0 < self.lethal <= 255:
            raise ValueError(f"Lethal threshold must lie in (0, 255], got {self.lethal}!")
        if not self.r_t > 0:
            raise ValueError(f"Collision radius must be positive, got {self.r_t}!")
        if any(w < 0 for w in vars(self.weights).values()):
            raise ValueError("Cost weights must be nonnegative!")


def map_cost(cost_map: CostMap | None, points: np.ndarray) -> np.ndarray:
    """Cost map value at each point, ``OUTSIDE_COST`` outside the map."""
    points = np.atleast_2d(points)
    if cost_map is None:
        return np.zeros(len(points))
    cells = np.floor(cost_map.fractional_cell(points) + 0.5).astype(int)
    nrows, ncols = cost_map.shape
    inside = (cells[:, 0] >= 0) & (cells[:, 0] < nrows) & (cells[:, 1] >= 0) & (cells[:, 1] < ncols)
    values = np.full(len(points), OUTSIDE_COST)
    values[inside] = np.asarray(cost_map.data, dtype=float)[cells[inside, 0], cells[inside, 1]]
    return values


def _closest_on_path(points: np.ndarray, path: np.ndarray, fallback_heading: float) -> tuple[np.ndarray, np.ndarray]:
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if len(path) == 1:
        return np.repeat(path, len(points), axis=0), np.full(len(points), fallback_heading)
    closest = np.zeros_like(points)
    heading = np.zeros(len(points))
    best = np.full(len(points), np.inf)
    for a, b in zip(path[:-1], path[1:], strict=True):
        d = b - a
        length2 = float(d @ d)
        if length2 == 0:
            continue
        u = np.clip((points - a) @ d / length2, 0.0, 1.0)
        q = a + u[:, None] * d
        dist = np.linalg.norm(points - q, axis=1)
        better = dist < best
        best[better] = dist[better]
        closest[better] = q[better]
        heading[better] = np.arctan2(d[1], d[0])
    unset = np.isinf(best)
    closest[unset] = path[0]
    heading[unset] = fallback_heading
    return closest, heading


def cost_components(states: np.ndarray, previous: np.ndarray, t: int, ctx: StageContext) -> dict[str, np.ndarray]:
    """Unweighted stage cost components of a batch of states.

    Args:
        states (np.ndarray): ``(K, 5)`` states at step ``t``.
        previous (np.ndarray): ``(K, 5)`` states at step ``t - 1``.
        t (int): Step within the planning horizon, from 1.
        ctx (StageContext): Context.

    Returns:
        dict[str, np.ndarray]: ``(K,)`` values per component, keyed like ``CostWeights`` fields.
    """
    p, theta = states[:, :2], states[:, 2]
    goal = np.asarray(ctx.goal, dtype=float)
    goal_dir = np.array([np.cos(ctx.goal_heading), np.sin(ctx.goal_heading)])
    to_goal = goal - p
    distance = np.linalg.norm(to_goal, axis=1)

    along = (to_goal / 2) @ goal_dir
    heading = np.exp(np.minimum(along**2, MAX_EXPONENT)) * np.minimum(-np.cos(ctx.goal_heading - theta), 0.9)

    pointing = np.where(
        (distance < ctx.r_p) & (distance > 0),
        np.maximum(-np.cos(np.arctan2(to_goal[:, 1], to_goal[:, 0]) - ctx.goal_heading), 0.0),
        0.0,
    )

    closest, path_heading = _closest_on_path(p, ctx.path, ctx.goal_heading)
    path_distance = np.minimum(np.linalg.norm(closest - p, axis=1) / ctx.delta_m, 1.0) ** 2

    step = p - previous[:, :2]
    moved = np.linalg.norm(step, axis=1)
    unit = np.divide(step, moved[:, None], out=np.zeros_like(step), where=moved[:, None] > 0)
    alignment = unit[:, 0] * np.cos(path_heading) + unit[:, 1] * np.sin(path_heading)
    path_heading_cost = np.where(moved > 0, 1.0 - alignment, 0.0)

    now, before = map_cost(ctx.cost_map, p), map_cost(ctx.cost_map, previous[:, :2])
    lethal_now, lethal_before = now >= ctx.lethal, before >= ctx.lethal
    costmap = np.select(
        [lethal_now & ~lethal_before, lethal_now & (t == ctx.horizon), lethal_now],
        [LETHAL_COST, LETHAL_COST, ctx.lethal_penalty],
        default=now / ctx.lethal,
    )

    collision = np.zeros(len(p))
    neighbors = np.asarray(ctx.neighbors, dtype=float).reshape(-1, 2)
    if len(neighbors):
        gaps = np.linalg.norm(p[:, None, :] - neighbors[None, :, :], axis=2)
        collision = np.where(np.any(gaps < ctx.r_t, axis=1), LETHAL_COST, 0.0)

    return {
        "goal": distance,
        "heading": heading,
        "pointing": pointing,
        "path_distance": path_distance,
        "path_heading": path_heading_cost,
        "costmap": costmap,
        "collision": collision,
    }


def stage_cost_batch(states: np.ndarray, previous: np.ndarray, t: int, ctx: StageContext) -> np.ndarray:
    """Weighted stage cost of a batch of states."""
    components = cost_components(states, previous, t, ctx)
    return sum(getattr(ctx.weights, name) * value for name, value in components.items())


def stage_cost(state: RobotState, previous: RobotState, ctx: StageContext, t: int = 1) -> float:
    """Weighted stage cost of one robot state. Not sign-definite: the heading term may be negative."""
    return float(stage_cost_batch(state.as_array()[None, :], previous.as_array()[None, :], t, ctx)[0])


@dataclass(frozen=True)
class MppiParams:
    """Sampling parameters.

    Args:
        n_samples (int): Number of rollouts K.
        horizon (int): Rollout length H in steps.
        sigma (tuple[float, float]): Standard deviation of the noise on ``[v, omega]``.
        temperature (float): Temperature lambda of the rollout weights.
    """

    n_samples: int = 512
    horizon: int = 30
    sigma: tuple[float, float] = (0.5, 0.5)
    temperature: float = 1.0

    def __post_init__(self):
        if self.n_samples < 1 or self.horizon < 1:
            raise ValueError("MPPI needs at least one sample and one step!")
        if not self.temperature > 0:
            raise ValueError(f"MPPI temperature must be positive, got {self.temperature}!")


def rollout(state: np.ndarray, controls: np.ndarray, k: KinematicParams) -> np.ndarray:
    """States visited by applying ``(K, H, 2)`` control sequences from one ``(5,)`` state, ``(K, H + 1, 5)``."""
    n, horizon = controls.shape[:2]
    states = np.empty((n, horizon + 1, 5))
    states[:, 0] = state
    for t in range(horizon):
        states[:, t + 1] = step_batch(states[:, t], controls[:, t], k)
    return states


def trajectory_costs(states: np.ndarray, ctx: StageContext) -> np.ndarray:
    """Sum of the stage costs along each ``(H + 1, 5)`` trajectory of a ``(K, H + 1, 5)`` batch."""
    costs = np.zeros(states.shape[0])
    for t in range(1, states.shape[1]):
        costs += stage_cost_batch(states[:, t], states[:, t - 1], t, ctx)
    return costs


def mppi_plan(
    state: RobotState,
    ctx: StageContext,
    k: KinematicParams,
    params: MppiParams,
    rng: np.random.Generator | int = 0,
    nominal: np.ndarray | None = None,
) -> np.ndarray:
    """One MPPI update of a nominal control sequence.

    Args:
        state (RobotState): Current state.
        ctx (StageContext): Cost context.
        k (KinematicParams): Kinematic limits.
        params (MppiParams): Sampling parameters.
        rng (np.random.Generator | int): Random generator or seed. Defaults to 0.
        nominal (np.ndarray | None): ``(H, 2)`` nominal controls. Defaults to None (standing still).

    Returns:
        np.ndarray: ``(H, 2)`` updated control sequence.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    nominal = np.zeros((params.horizon, 2)) if nominal is None else np.asarray(nominal, dtype=float)
    noise = rng.standard_normal((params.n_samples, params.horizon, 2)) * np.asarray(params.sigma)
    states = rollout(state.as_array(), nominal[None, :, :] + noise, k)
    costs = trajectory_costs(states, ctx)
    weights = np.exp(-(costs - costs.min()) / params.temperature)
    weights /= weights.sum()
    return nominal + np.einsum("k,kht->ht", weights, noise)


class MppiPlanner:
    """Receding-horizon MPPI controller for one robot.

    Args:
        kinematics (KinematicParams): Kinematic limits.
        params (MppiParams): Sampling parameters.
        seed (int | list[int]): Random seed. Defaults to 0.
    """

    def __init__(self, kinematics: KinematicParams, params: MppiParams, seed: int | list[int] = 0) -> None:
        self.kinematics = kinematics
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.nominal = np.zeros((params.horizon, 2))

    def plan(self, state: RobotState, ctx: StageContext) -> np.ndarray:
        """Updates and returns the nominal control sequence."""
        self.nominal = mppi_plan(state, ctx, self.kinematics, self.params, self.rng, self.nominal)
        return self.nominal

    def predicted_trajectory(self, state: RobotState) -> np.ndarray:
        """Positions the nominal sequence leads to, ``(H, 2)``."""
        return rollout(state.as_array(), self.nominal[None, :, :], self.kinematics)[0, 1:, :2]

    def shift(self):
        """Drops the executed first control and repeats the last one."""
        self.nominal = np.vstack([self.nominal[1:], self.nominal[-1:]])
