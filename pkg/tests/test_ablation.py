# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

from dataclasses import replace

import pytest

from dtg.planning.ablation import VARIANTS, ablation_suite, ablation_table, shortest_path_cost, variant_instance
from dtg.planning.instances import bounding_instance, illustrative_instance, random_instance
from dtg.planning.solver import SolveStatus


@pytest.fixture(scope="module")
def illustrative():
    """Fixture with the illustrative instance."""
    return illustrative_instance()


@pytest.fixture(scope="module")
def suite(illustrative):
    """Fixture with all ablation variants of the illustrative instance."""
    graph, scenario = illustrative
    return ablation_suite(graph, scenario, budget=60.0)


def test_variant_instance(illustrative):
    """Test which components each variant keeps."""
    graph, scenario = illustrative
    g, s = variant_instance(graph, scenario, "plain")
    assert g.overwatch == ()
    assert {(p.a, p.m, p.r) for p in s.edge_params.values()} == {(1, 0.0, 0.0)}

    g, s = variant_instance(graph, scenario, "vulnerable")
    assert len(g.overwatch) == 4
    assert s.edge_params[(1, 3)].a == 4
    assert s.edge_params[(1, 3)].r == 0.0

    g, s = variant_instance(graph, scenario, "full")
    assert g is graph
    assert s.edge_params == scenario.edge_params

    with pytest.raises(ValueError, match="Unknown ablation variant 'teaming'"):
        variant_instance(graph, scenario, "teaming")


def test_shortest_path_cost(illustrative):
    """Test the oracle on a single scout: path 1-3-5 costs 120 plus time costs 20 + 30."""
    graph, scenario = illustrative
    scout = replace(scenario, n_robots=1, starts={(1, 1): 1})
    g, s = variant_instance(graph, scout, "plain")
    assert shortest_path_cost(g, s) == pytest.approx(170.0)
    assert shortest_path_cost(g, replace(s, horizon=5)) == pytest.approx(170.0)


def test_shortest_path_cost_errors(illustrative):
    """Test that teams and unreachable goals are refused."""
    graph, scenario = illustrative
    g, s = variant_instance(graph, scenario, "plain")
    with pytest.raises(ValueError, match="needs one robot"):
        shortest_path_cost(g, s)
    scout = replace(s, n_robots=1, starts={(1, 1): 1})
    with pytest.raises(ValueError, match=r"cannot be reached from \(1, 1\) in 3 steps"):
        shortest_path_cost(g, replace(scout, horizon=3))
    with pytest.raises(ValueError, match="in 1 step"):
        shortest_path_cost(g, replace(scout, horizon=1))


@pytest.mark.parametrize("seed", range(20))
def test_plain_variant_matches_oracle(seed):
    """Test that without overwatch, vulnerability and teaming the optimum is a shortest path."""
    graph, scenario = random_instance(4 + seed % 4, 0.5, 1, seed=seed, max_horizon=8)
    results = ablation_suite(graph, scenario, variants=("plain", "overwatch"))
    assert results["plain"].report.status == SolveStatus.OPTIMAL
    oracle = shortest_path_cost(*variant_instance(graph, scenario, "plain"))
    assert results["plain"].objective == pytest.approx(oracle, abs=1e-3)
    assert results["overwatch"].objective <= results["plain"].objective + 1e-3


@pytest.mark.parametrize("seed", range(20))
def test_overwatch_never_costs_more(seed):
    """Test that switching overwatch on never raises the optimum of a team."""
    n_robots = 2 + seed % 3
    graph, scenario = random_instance(5, 0.5, n_robots, seed=200 + seed, n_goal=1 + seed % n_robots, max_horizon=6)
    results = ablation_suite(graph, scenario, variants=("plain", "overwatch"))
    assert all(r.report.status == SolveStatus.OPTIMAL for r in results.values())
    assert results["overwatch"].objective <= results["plain"].objective + 1e-3


def test_ablation_suite(suite):
    """Test the order of the variant optima on the illustrative instance."""
    assert tuple(suite) == VARIANTS
    assert all(r.report.status == SolveStatus.OPTIMAL for r in suite.values())
    objectives = {name: r.objective for name, r in suite.items()}
    assert objectives["plain"] == pytest.approx(170.0)
    assert objectives["overwatch"] <= objectives["plain"] + 1e-6
    assert objectives["vulnerable"] >= objectives["overwatch"] - 1e-6
    assert objectives["full"] <= objectives["vulnerable"] + 1e-6
    assert suite["plain"].overwatch_steps == 0
    assert suite["plain"].moving_robots == 1


def test_ablation_table(suite):
    """Test the report rows."""
    rows = ablation_table(suite)
    assert [row["variant"] for row in rows] == list(VARIANTS)
    assert rows[0] == {
        "variant": "plain",
        "status": SolveStatus.OPTIMAL.value,
        "objective": suite["plain"].objective,
        "overwatch_steps": 0,
        "moving_robots": 1,
    }


def test_overwatch_variant_watches():
    """Test that adding overwatch makes the team watch its own crossings when the reductions dominate."""
    graph, scenario = bounding_instance(horizon=14, n_robots=2)
    results = ablation_suite(graph, scenario, variants=("plain", "overwatch"))
    assert results["plain"].overwatch_steps == 0
    assert results["overwatch"].overwatch_steps >= 1
    assert results["overwatch"].objective < results["plain"].objective
