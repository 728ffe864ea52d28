# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

from dtg.planning.graph import EdgeCostParams, Scenario, TopoGraph
from dtg.planning.instances import illustrative_instance
from dtg.planning.lp_format import (
    LPFormatError,
    SolutionValidationError,
    export_lp,
    export_solution,
    import_solution,
    parse_solution,
)
from dtg.planning.model import ModelBuilder, OccupancySolution, Sense, VariableKind, build_milp


@pytest.fixture()
def toy_model():
    """Fixture with a two-variable model."""
    builder = ModelBuilder("toy")
    x = builder.add_variable("x", 0.0, 4.0, VariableKind.INTEGER)
    y = builder.add_variable("y", kind=VariableKind.BINARY)
    builder.add_constraint("c1", [(x, 2.0), (y, 2.0)], Sense.GE, 3.0)
    builder.add_constraint("c2", {x: 1.0}, Sense.EQ, 2.0)
    builder.add_objective(x, 1.0)
    return builder.build()


@pytest.fixture()
def line_model():
    """Fixture with the model of one robot crossing a three-node line, and its optimal occupancy."""
    graph = TopoGraph.build({1: (0.0, 0.0), 2: (10.0, 0.0), 3: (20.0, 0.0)}, [(1, 2), (2, 3)], bidirectional=True)
    params = {e: EdgeCostParams(w_bar=5.0) for e in graph.traversal_edges}
    scenario = Scenario(n_robots=1, horizon=4, starts={(1, 1): 1}, goals={(3, 3): 1}, edge_params=params)
    p = np.zeros((len(graph.locations), 4), dtype=int)
    for t, loc in enumerate([(1, 1), (1, 2), (2, 3), (3, 3)]):
        p[graph.location_index[loc], t] = 1
    return build_milp(graph, scenario), OccupancySolution.from_occupancy(graph, scenario, p)


def _values(model, solution):
    layout = model.layout
    values = np.zeros(model.n_variables)
    values[layout.p] = solution.p
    values[layout.phi] = solution.phi
    values[layout.psi] = solution.psi
    values[layout.c_trav] = solution.c_trav
    values[layout.c_ow] = solution.c_ow
    return values


def test_export_lp(toy_model):
    """Test the LP text of a small model."""
    expected = "\n".join(
        [
            "\\ Problem: toy",
            "Minimize",
            " obj: x",
            "Subject To",
            " c1: 2 x + 2 y >= 3",
            " c2: x = 2",
            "Bounds",
            " 0 <= x <= 4",
            "Generals",
            "x",
            "Binaries",
            "y",
            "End",
        ]
    )
    assert export_lp(toy_model) == expected + "\n"


def test_export_lp_illustrative():
    """Test that the LP text of a full model is deterministic and keeps lines short."""
    graph, scenario = illustrative_instance()
    first = export_lp(build_milp(graph, scenario))
    second = export_lp(build_milp(graph, scenario))
    assert first == second
    assert max(len(line) for line in first.splitlines()) <= 255
    assert "p_1_1_1" in first
    assert first.rstrip().endswith("End")


def test_export_solution(toy_model):
    """Test the solution text of a small model."""
    text = export_solution(toy_model, np.array([2.0, 0.0]))
    assert text == "# Solution for toy\n=obj= 2\nx 2\ny 0\n"


def test_parse_solution(toy_model):
    """Test that comments are skipped and missing variables are zero."""
    text = "# from an external solver\n=obj= 2\n\nx 2  # trailing comment\n"
    np.testing.assert_allclose(parse_solution(text, toy_model), [2.0, 0.0])


@pytest.mark.parametrize(
    "text, match",
    [
        ("x 1\nx 2\n", "Line 2: variable x listed twice"),
        ("z 1\n", "Line 1: unknown variable z"),
        ("x one\n", "Line 1: invalid value 'one' for x"),
        ("x = 1\n", "Line 1: expected 'name value'"),
    ],
)
def test_parse_solution_errors(toy_model, text, match):
    """Test that malformed solution text is refused with its line number."""
    with pytest.raises(LPFormatError, match=match):
        parse_solution(text, toy_model)


def test_import_solution(line_model):
    """Test that an exported feasible solution is imported with the same plan."""
    model, solution = line_model
    text = export_solution(model, _values(model, solution))
    imported = import_solution(text, model)
    np.testing.assert_array_equal(imported.p, solution.p)
    assert imported.objective == pytest.approx(15.0)


def test_import_solution_infeasible(line_model):
    """Test that an infeasible solution is refused."""
    model, _ = line_model
    with pytest.raises(SolutionValidationError, match="infeasible for dtg_milp"):
        import_solution("p_1_1_1 1\n", model)
