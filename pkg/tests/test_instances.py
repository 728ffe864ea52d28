# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import networkx as nx
import pytest

from dtg.planning.graph import validate
from dtg.planning.instances import bounding_instance, illustrative_instance, random_instance
from dtg.planning.serialization import dumps, graph_to_dict, scenario_to_dict


def test_illustrative_instance():
    """Test the shape of the illustrative instance."""
    graph, scenario = illustrative_instance()
    assert len(graph.nodes) == 5
    assert len(graph.locations) == 17
    assert len(graph.traversal_edges) == 12
    assert len(graph.overwatch) == 4
    assert scenario.n_robots == 10
    assert scenario.horizon == 10
    assert scenario.goals == {(5, 5): 1}


def test_bounding_instance():
    """Test the shape of the two-chain instance."""
    graph, scenario = bounding_instance(horizon=14, n_robots=2)
    assert len(graph.locations) == 43
    assert len(graph.traversal_edges) == 32
    assert len(graph.overwatch) == 8
    assert scenario.horizon == 14
    assert validate(graph, scenario) == []


@pytest.mark.parametrize("density", [0.2, 0.5, 0.8])
def test_random_instance(density):
    """Test that random instances are connected, valid, dense enough and have a reachable goal."""
    graph, scenario = random_instance(6, density, n_robots=3, seed=7, n_goal=2)
    undirected = nx.Graph(list(graph.traversal_edges))
    assert nx.is_connected(undirected)
    assert undirected.number_of_edges() >= max(5, round(density * 15))
    assert validate(graph, scenario) == []
    (start,) = scenario.starts
    (goal,) = scenario.goals
    hops = nx.shortest_path_length(undirected, start[0], goal[0])
    assert scenario.horizon == max(2 * hops, hops + 2)
    assert scenario.goals[goal] == 2


def test_random_instance_determinism():
    """Test that the same seed gives the same instance."""
    first = random_instance(6, 0.5, n_robots=2, seed=3)
    second = random_instance(6, 0.5, n_robots=2, seed=3)
    assert dumps(graph_to_dict(first[0])) == dumps(graph_to_dict(second[0]))
    assert dumps(scenario_to_dict(first[1])) == dumps(scenario_to_dict(second[1]))


def test_random_instance_max_horizon():
    """Test that the derived horizon is capped, but never below the hop count plus two."""
    _, scenario = random_instance(8, 0.2, n_robots=1, seed=0, max_horizon=3)
    assert scenario.horizon >= 3
    _, fixed = random_instance(8, 0.2, n_robots=1, seed=0, horizon=9)
    assert fixed.horizon == 9


def test_random_instance_errors():
    """Test the argument checks of random instances."""
    with pytest.raises(ValueError, match="at least 2 nodes"):
        random_instance(1, 0.5, n_robots=1, seed=0)
    with pytest.raises(ValueError, match="Edge density"):
        random_instance(4, 0.0, n_robots=1, seed=0)
