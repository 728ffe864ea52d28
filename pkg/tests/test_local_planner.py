# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import math

import numpy as np
import pytest

from dtg.planning.local_planner import (
    LETHAL_COST,
    CostWeights,
    KinematicParams,
    MppiParams,
    MppiPlanner,
    RobotState,
    StageContext,
    cost_components,
    dubins_step,
    map_cost,
    mppi_plan,
    stage_cost,
    step_batch,
    wrap_angle,
)
from dtg.planning.rasters import CostMap


@pytest.fixture()
def kinematics():
    """Fixture with the default differential-drive limits."""
    return KinematicParams()


@pytest.fixture()
def context():
    """Fixture with a goal at (5, 0) facing east along a straight path from the origin."""
    return StageContext(goal=np.array([5.0, 0.0]), goal_heading=0.0, path=np.array([[0.0, 0.0], [5.0, 0.0]]))


@pytest.fixture()
def cost_map():
    """Fixture with a 10 x 10 cost map of 1 m cells: free, a lethal block at x, y in [6, 8) and a mid-cost cell."""
    data = np.zeros((10, 10))
    data[6:8, 6:8] = 254.0
    data[2, 2] = 126.5
    return CostMap(data=data)


def _components(ctx, state, previous=None, t=1):
    previous = state if previous is None else previous
    return {k: float(v[0]) for k, v in cost_components(state[None, :], previous[None, :], t, ctx).items()}


def test_wrap_angle():
    """Test that angles are wrapped to (-pi, pi]."""
    assert wrap_angle(1.5 * math.pi) == pytest.approx(-0.5 * math.pi)
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.25) == pytest.approx(0.25)


def test_step_from_rest(kinematics):
    """Test that the wheel acceleration limit caps the first step from rest."""
    state = dubins_step(RobotState(0.0, 0.0, 0.0), [10.0, 0.0], kinematics)
    assert state.wheels == pytest.approx((1.0, 1.0))
    assert state.x == pytest.approx(0.03)
    assert state.y == pytest.approx(0.0)
    assert state.theta == pytest.approx(0.0)


def test_step_turning(kinematics):
    """Test a pure rotation within the limits."""
    state = dubins_step(RobotState(0.0, 0.0, 0.0, (0.5, -0.5)), [0.0, 0.375], kinematics)
    assert state.wheels == pytest.approx((0.5, -0.5))
    assert state.x == pytest.approx(0.0)
    assert state.theta == pytest.approx(0.3 / 0.8 * 1.0 * 0.1)


def test_step_clamps(kinematics):
    """Test that wheel speeds stay within their limits and change by at most one acceleration step."""
    rng = np.random.default_rng(1)
    n = 1_000_000
    r = kinematics.wheel_radius
    low, high = kinematics.v_min / r, kinematics.v_max / r
    states = np.column_stack([rng.normal(size=(n, 3)), rng.uniform(low, high, size=(n, 2))])
    controls = rng.normal(scale=5.0, size=(n, 2))
    nxt = step_batch(states, controls, kinematics)
    step = kinematics.a_max / r * kinematics.dt
    assert np.all(nxt[:, 3:5] >= low - 1e-12)
    assert np.all(nxt[:, 3:5] <= high + 1e-12)
    assert np.all(np.abs(nxt[:, 3:5] - states[:, 3:5]) <= step + 1e-12)
    assert np.all(np.abs(nxt[:, 2]) <= math.pi)


def test_step_from_rest_below_minimum_speed():
    """Test that a robot at rest with a positive minimum speed reaches it one acceleration step at a time."""
    kinematics = KinematicParams(v_min=0.6)
    state = RobotState(0.0, 0.0, 0.0)
    state = dubins_step(state, [0.0, 0.0], kinematics)
    assert state.wheels == pytest.approx((1.0, 1.0))
    state = dubins_step(state, [0.0, 0.0], kinematics)
    assert state.wheels == pytest.approx((2.0, 2.0))
    state = dubins_step(state, [0.0, 0.0], kinematics)
    assert state.wheels == pytest.approx((2.0, 2.0))


def test_kinematic_params_errors():
    """Test that inconsistent limits are refused."""
    with pytest.raises(ValueError, match="must be positive"):
        KinematicParams(dt=0.0)
    with pytest.raises(ValueError, match="exceeds v_max"):
        KinematicParams(v_min=2.0, v_max=1.0)
    with pytest.raises(ValueError, match="a_max must be nonnegative"):
        KinematicParams(a_max=-1.0)


def test_stage_cost_at_goal(context):
    """Test that a robot at rest at its goal, facing the goal heading, only collects the heading reward."""
    at_goal = RobotState(5.0, 0.0, 0.0)
    ctx = StageContext(goal=context.goal, goal_heading=0.0, path=context.path, weights=CostWeights(heading=1.0))
    assert stage_cost(at_goal, at_goal, ctx) == pytest.approx(-1.0)
    assert stage_cost(at_goal, at_goal, context) == pytest.approx(-1e-3)


def test_cost_components(context):
    """Test the goal, pointing, path distance and path heading components."""
    overshoot = np.array([5.5, 0.0, 0.0, 0.0, 0.0])
    parts = _components(context, overshoot)
    assert parts["goal"] == pytest.approx(0.5)
    assert parts["pointing"] == pytest.approx(1.0)
    assert parts["path_heading"] == 0.0

    short = np.array([4.5, 0.0, 0.0, 0.0, 0.0])
    assert _components(context, short)["pointing"] == pytest.approx(0.0)

    beside = np.array([2.0, 1.0, 0.0, 0.0, 0.0])
    assert _components(context, beside)["path_distance"] == pytest.approx(0.25)
    far = np.array([2.0, 5.0, 0.0, 0.0, 0.0])
    assert _components(context, far)["path_distance"] == pytest.approx(1.0)

    sideways = _components(context, beside, previous=np.array([2.0, 0.5, 0.0, 0.0, 0.0]))
    assert sideways["path_heading"] == pytest.approx(1.0)
    backwards = _components(context, beside, previous=np.array([2.5, 1.0, 0.0, 0.0, 0.0]))
    assert backwards["path_heading"] == pytest.approx(2.0)


def test_heading_exponent_is_capped():
    """Test that the heading term stays finite far from the goal."""
    ctx = StageContext(goal=np.array([1000.0, 0.0]), goal_heading=0.0, path=np.array([[0.0, 0.0]]))
    parts = _components(ctx, np.array([0.0, 0.0, 0.0, 0.0, 0.0]))
    assert parts["heading"] == pytest.approx(-math.exp(50.0))


def test_costmap_component(context, cost_map):
    """Test the scaled, lethal-entry, lethal-stay and off-map costs."""
    ctx = StageContext(goal=context.goal, goal_heading=0.0, path=context.path, cost_map=cost_map, horizon=5)
    free = np.array([1.5, 1.5, 0.0, 0.0, 0.0])
    mid = np.array([2.5, 2.5, 0.0, 0.0, 0.0])
    lethal = np.array([6.5, 6.5, 0.0, 0.0, 0.0])
    deeper = np.array([7.5, 7.5, 0.0, 0.0, 0.0])
    assert _components(ctx, mid, free)["costmap"] == pytest.approx(0.5)
    assert _components(ctx, lethal, free)["costmap"] == LETHAL_COST
    assert _components(ctx, deeper, lethal, t=2)["costmap"] == pytest.approx(1000.0)
    assert _components(ctx, deeper, lethal, t=5)["costmap"] == LETHAL_COST
    assert _components(ctx, np.array([-3.0, 1.0, 0.0, 0.0, 0.0]), free)["costmap"] == LETHAL_COST


def test_map_cost(cost_map):
    """Test cost lookups on and off the map."""
    np.testing.assert_allclose(map_cost(cost_map, np.array([[2.5, 2.5], [6.2, 7.9], [11.0, 0.0]])), [126.5, 254, 255])
    np.testing.assert_allclose(map_cost(None, np.array([[2.5, 2.5]])), [0.0])


def test_collision_component(context):
    """Test that a neighbour inside the collision radius is lethal."""
    ctx = StageContext(
        goal=context.goal, goal_heading=0.0, path=context.path, r_t=0.5, neighbors=np.array([[2.0, 0.3], [9.0, 9.0]])
    )
    assert _components(ctx, np.array([2.0, 0.0, 0.0, 0.0, 0.0]))["collision"] == LETHAL_COST
    assert _components(ctx, np.array([2.0, -0.3, 0.0, 0.0, 0.0]))["collision"] == 0.0


def test_stage_context_errors(context):
    """Test that inconsistent contexts are refused."""
    with pytest.raises(ValueError, match="Lethal threshold"):
        StageContext(goal=context.goal, goal_heading=0.0, path=context.path, lethal=300.0)
    with pytest.raises(ValueError, match="Collision radius"):
        StageContext(goal=context.goal, goal_heading=0.0, path=context.path, r_t=0.0)
    with pytest.raises(ValueError, match="nonnegative"):
        StageContext(goal=context.goal, goal_heading=0.0, path=context.path, weights=CostWeights(goal=-1.0))


def test_mppi_params_errors():
    """Test that empty or cold samplers are refused."""
    with pytest.raises(ValueError, match="at least one sample"):
        MppiParams(n_samples=0)
    with pytest.raises(ValueError, match="temperature must be positive"):
        MppiParams(temperature=0.0)


def test_mppi_without_noise(context, kinematics):
    """Test that a single noiseless rollout returns the nominal sequence."""
    params = MppiParams(n_samples=1, horizon=5, sigma=(0.0, 0.0))
    nominal = np.tile([0.5, 0.1], (5, 1))
    plan = mppi_plan(RobotState(0.0, 0.0, 0.0), context, kinematics, params, rng=3, nominal=nominal)
    np.testing.assert_allclose(plan, nominal)


def test_mppi_deterministic(context, kinematics):
    """Test that the same seed gives the same plan."""
    params = MppiParams(n_samples=64, horizon=10)
    first = mppi_plan(RobotState(0.0, 0.0, 0.0), context, kinematics, params, rng=7)
    second = mppi_plan(RobotState(0.0, 0.0, 0.0), context, kinematics, params, rng=7)
    np.testing.assert_array_equal(first, second)
    assert first.shape == (10, 2)


def test_mppi_planner_drives_to_goal(context, kinematics):
    """Test that on a free map the goal distance shrinks at every replan until the robot is within r_p."""
    planner = MppiPlanner(kinematics, MppiParams(n_samples=256, horizon=20), seed=0)
    state = RobotState(0.0, 0.0, 0.0)
    distances = [float(np.linalg.norm(state.position - context.goal))]
    for _ in range(200):
        controls = planner.plan(state, context)
        state = dubins_step(state, controls[0], kinematics)
        planner.shift()
        distances.append(float(np.linalg.norm(state.position - context.goal)))
        if distances[-1] < context.r_p:
            break
    assert distances[-1] < context.r_p
    assert np.all(np.diff(distances) < 0)
    assert planner.predicted_trajectory(state).shape == (20, 2)
