# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

from dataclasses import replace

import numpy as np
import pytest

from dtg.planning.graph import EdgeCostParams, Scenario, TopoGraph
from dtg.planning.instances import bounding_instance, illustrative_instance
from dtg.planning.model import (
    ModelBuilder,
    ModelBuildError,
    OccupancySolution,
    Sense,
    VariableKind,
    build_gmip,
    build_milp,
    evaluate_plan_cost,
    occupancy_violations,
    step_cost,
    variable_count,
)


@pytest.fixture(scope="module")
def illustrative():
    """Fixture with the illustrative instance."""
    return illustrative_instance()


@pytest.fixture()
def line_instance():
    """Fixture with a line 1 - 2 - 3, one robot going from node 1 to node 3 in four steps.

    Every edge costs 5 and the time weight is 1, so the direct plan costs (5 + 2) + (5 + 3) = 15.
    """
    graph = TopoGraph.build({1: (0.0, 0.0), 2: (10.0, 0.0), 3: (20.0, 0.0)}, [(1, 2), (2, 3)], bidirectional=True)
    params = {e: EdgeCostParams(w_bar=5.0) for e in graph.traversal_edges}
    scenario = Scenario(n_robots=1, horizon=4, starts={(1, 1): 1}, goals={(3, 3): 1}, edge_params=params)
    return graph, scenario


def _occupancy(graph, horizon, routes):
    p = np.zeros((len(graph.locations), horizon), dtype=int)
    for route, count in routes:
        for t, loc in enumerate(route):
            p[graph.location_index[loc], t] += count
    return p


def _scout_plan(graph):
    """One robot going 1 -> 3 -> 5, nine waiting at node 1."""
    scout = [(1, 1), (1, 3), (3, 5)] + [(5, 5)] * 7
    return _occupancy(graph, 10, [(scout, 1), ([(1, 1)] * 10, 9)])


def _values(model, solution):
    layout = model.layout
    values = np.zeros(model.n_variables)
    values[layout.p] = solution.p
    values[layout.phi] = solution.phi
    values[layout.psi] = solution.psi
    values[layout.c_trav] = solution.c_trav
    values[layout.c_ow] = solution.c_ow
    return values


@pytest.mark.parametrize(
    "n_locations, n_edges, n_opportunities, horizon, expected",
    [(17, 12, 4, 10, 460), (43, 32, 8, 10, 1160), (32, 24, 18, 10, 990), (51, 36, 32, 12, 1872)],
)
def test_variable_count(n_locations, n_edges, n_opportunities, horizon, expected):
    """Test the variable count formula on four model shapes."""
    assert variable_count(n_locations, n_edges, n_opportunities, horizon) == expected


def test_build_milp_illustrative(illustrative):
    """Test the size and layout of the model of the illustrative instance."""
    graph, scenario = illustrative
    model = build_milp(graph, scenario)
    assert model.n_variables == 460
    assert model.layout.p.shape == (17, 10)
    assert model.layout.phi.shape == (12, 10)
    assert model.layout.c_ow.shape == (4, 10)
    assert model.variables[model.variable_index["p_1_1_1"]].kind == VariableKind.INTEGER
    assert model.variables[model.variable_index["phi_1_2_3"]].kind == VariableKind.BINARY
    assert model.variables[model.variable_index["co_0_1"]].ub == 0.0
    assert repr(model).startswith("MilpModel(name='dtg_milp', variables=460")


def test_build_milp_bounding():
    """Test the size of the model of the two-chain instance."""
    graph, scenario = bounding_instance()
    assert build_milp(graph, scenario).n_variables == 1160


def test_build_milp_invalid(illustrative):
    """Test that invalid inputs are refused with the violated invariant."""
    graph, scenario = illustrative
    params = dict(scenario.edge_params)
    params[(1, 2)] = EdgeCostParams(w_bar=10.0, a=1, m=1.0, r=2.0)
    with pytest.raises(ModelBuildError, match="m_e < r_e"):
        build_milp(graph, replace(scenario, edge_params=params))
    with pytest.raises(ModelBuildError, match="goal unreachable"):
        build_gmip(graph, replace(scenario, horizon=2))


def test_build_gmip_size(line_instance):
    """Test the size of the per-robot model."""
    graph, scenario = line_instance
    scenario = replace(scenario, n_robots=2, starts={(1, 1): 2})
    assert build_gmip(graph, scenario).n_variables == 4 * (2 * 7 + 2 * 4 + 1)
    assert build_milp(graph, scenario).n_variables == 4 * (7 + 2 * 4 + 1)
    assert build_gmip(graph, scenario).layout.x.shape == (2, 7, 4)


def test_evaluate_plan_cost(line_instance):
    """Test the cost of a hand-made plan."""
    graph, scenario = line_instance
    p = _occupancy(graph, 4, [([(1, 1), (1, 2), (2, 3), (3, 3)], 1)])
    assert evaluate_plan_cost(graph, scenario, p) == pytest.approx(15.0)

    cheap = replace(scenario, edge_params={e: EdgeCostParams(w_bar=0.5) for e in graph.traversal_edges})
    assert evaluate_plan_cost(graph, cheap, p) == pytest.approx(1 + 2 + 1 + 3)


def test_evaluate_plan_cost_illustrative(illustrative):
    """Test the shortfall penalty: a lone scout on edges wanting four robots."""
    graph, scenario = illustrative
    assert evaluate_plan_cost(graph, scenario, _scout_plan(graph)) == pytest.approx((50 + 20) + (130 + 30))


def test_evaluate_plan_cost_infeasible(line_instance):
    """Test that broken plans are refused."""
    graph, scenario = line_instance
    jump = _occupancy(graph, 4, [([(1, 1), (2, 3), (3, 3), (3, 3)], 1)])
    with pytest.raises(ValueError, match="Infeasible occupancy plan"):
        evaluate_plan_cost(graph, scenario, jump)
    stay = _occupancy(graph, 4, [([(1, 1)] * 4, 1)])
    assert occupancy_violations(graph, scenario, stay) == ["goal (3, 3) has 0 robots, needs 1"]
    assert occupancy_violations(graph, scenario, np.zeros((7, 3))) == ["occupancy has shape (7, 3), expected (7, 4)"]


def test_step_cost_overwatch(illustrative):
    """Test that two robots watching from node 2 take the full benefit off edge (2, 4)."""
    graph, scenario = illustrative
    counts = np.zeros(len(graph.locations), dtype=int)
    counts[graph.location_index[(2, 2)]] = 2
    counts[graph.location_index[(2, 4)]] = 1
    counts[graph.location_index[(1, 1)]] = 7
    assert step_cost(graph, scenario, counts, 1) == pytest.approx(30 - 20 + 10 * 1)


def test_from_occupancy(line_instance):
    """Test the auxiliary values of a solution built from counts."""
    graph, scenario = line_instance
    p = _occupancy(graph, 4, [([(1, 1), (1, 2), (2, 3), (3, 3)], 1)])
    solution = OccupancySolution.from_occupancy(graph, scenario, p)
    assert solution.objective == pytest.approx(15.0)
    assert list(solution.psi) == [0, 1, 1, 0]
    assert list(solution.moving_robots()) == [0, 1, 1, 0]
    assert solution.count((2, 3), 3) == 1
    assert solution.phi[graph.traversal_index[(1, 2)], 1] == 1
    assert solution.check(graph, scenario) == []


def test_solution_satisfies_model(illustrative):
    """Test that a plan's tight auxiliary values are feasible in the model with the same objective."""
    graph, scenario = illustrative
    solution = OccupancySolution.from_occupancy(graph, scenario, _scout_plan(graph))
    model = build_milp(graph, scenario)
    values = _values(model, solution)
    assert model.violations(values) == []
    assert model.objective_value(values) == pytest.approx(solution.objective)

    decoded = OccupancySolution.from_values(model, values)
    np.testing.assert_array_equal(decoded.p, solution.p)
    assert decoded.objective == pytest.approx(230.0)


def test_to_dataset(line_instance):
    """Test the Dataset view of a solution."""
    graph, scenario = line_instance
    p = _occupancy(graph, 4, [([(1, 1), (1, 2), (2, 3), (3, 3)], 1)])
    ds = OccupancySolution.from_occupancy(graph, scenario, p).to_dataset()
    assert ds["p"].dims == ("location", "time")
    assert ds["psi"].dims == ("time",)
    assert list(ds["time"].values) == [1, 2, 3, 4]
    assert list(ds["edge"].values) == ["1_2", "2_1", "2_3", "3_2"]
    assert int(ds["p"].sel(location="2_3", time=3)) == 1
    assert ds.attrs["objective"] == pytest.approx(15.0)


def test_model_builder():
    """Test merging of repeated terms and the standard form."""
    builder = ModelBuilder("toy")
    x = builder.add_variable("x", 0.0, 4.0, VariableKind.INTEGER)
    y = builder.add_variable("y", kind=VariableKind.BINARY)
    builder.add_constraint("c1", [(x, 1.0), (y, 2.0), (x, 1.0)], Sense.GE, 3.0)
    builder.add_constraint("c2", {x: 1.0, y: 0.0}, Sense.EQ, 2.0)
    builder.add_objective(x, 1.0)
    model = builder.build()

    assert model.constraints[0].coefficients == ((0, 2.0), (1, 2.0))
    assert model.constraints[1].coefficients == ((0, 1.0),)
    form = model.standard_form
    np.testing.assert_allclose(form.a_ub.toarray(), [[-2.0, -2.0]])
    np.testing.assert_allclose(form.b_ub, [-3.0])
    np.testing.assert_allclose(form.upper, [4.0, 1.0])
    assert list(form.integrality) == [1, 1]
    assert model.is_feasible([2.0, 0.0])
    assert model.violations([1.0, 1.0]) == ["c2: 1.0 = 2.0 violated"]
    assert not model.is_feasible([1.0, 1.0])
    assert model.relaxed().variables[0].kind == VariableKind.CONTINUOUS

    with pytest.raises(ValueError, match="Duplicate variable name"):
        builder.add_variable("x")
    with pytest.raises(ValueError, match="undeclared variable"):
        builder.add_constraint("c3", {5: 1.0}, Sense.LE, 0.0)
