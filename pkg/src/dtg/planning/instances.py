# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Ready-made planning instances.

- ``illustrative_instance``: five nodes, ten robots, one goal, with vulnerable edges and two watch nodes.
- ``bounding_instance``: two parallel chains joined by rungs, where watching the other chain pays off and the
  team moves by bounding overwatch.
- ``random_instance``: random benchmark graphs with a prescribed edge density.
"""

import itertools
import logging
import math

import networkx as nx
import numpy as np

from dtg.planning.graph import Edge, EdgeCostParams, OverwatchOpportunity, Scenario, TopoGraph

logger = logging.getLogger(__name__)

_ILLUSTRATIVE_NODES = {1: (0.0, 40.0), 2: (40.0, 80.0), 3: (50.0, 20.0), 4: (90.0, 70.0), 5: (110.0, 20.0)}

# undirected edge -> (w_bar, a, m, r)
_ILLUSTRATIVE_EDGES = {
    (1, 2): (10.0, 1, 1.0, 1.0),
    (1, 3): (20.0, 4, 10.0, 1.0),
    (2, 4): (30.0, 1, 1.0, 1.0),
    (3, 4): (10.0, 1, 1.0, 1.0),
    (3, 5): (100.0, 4, 10.0, 1.0),
    (4, 5): (70.0, 4, 10.0, 1.0),
}

# watcher -> (undirected watched edge, omega)
_ILLUSTRATIVE_OVERWATCH = [(2, (2, 4), 20.0), (3, (4, 5), 60.0)]


def illustrative_instance() -> tuple[TopoGraph, Scenario]:
    """Five-node example with ten robots starting at node 1 and at least one robot required at node 5.

    Returns:
        tuple[TopoGraph, Scenario]: 17 locations, 4 overwatch opportunities, 10 time steps, time weight 10.
    """
    params: dict[Edge, EdgeCostParams] = {}
    for (j, k), (w_bar, a, m, r) in _ILLUSTRATIVE_EDGES.items():
        params[(j, k)] = params[(k, j)] = EdgeCostParams(w_bar=w_bar, a=a, m=m, r=r)

    overwatch = []
    for watcher, (j, k), omega in _ILLUSTRATIVE_OVERWATCH:
        for edge in ((j, k), (k, j)):
            overwatch.append(OverwatchOpportunity(watcher=watcher, edge=edge, omega=omega, alpha=2, gamma=2.0))

    graph = TopoGraph.build(_ILLUSTRATIVE_NODES, _ILLUSTRATIVE_EDGES, overwatch=overwatch, bidirectional=True)
    scenario = Scenario(
        n_robots=10,
        horizon=10,
        starts={(1, 1): 10},
        goals={(5, 5): 1},
        edge_params=params,
        time_weight=10.0,
    )
    return graph, scenario


def bounding_instance(horizon: int = 10, n_robots: int = 2) -> tuple[TopoGraph, Scenario]:
    """Two chains from node 1 to node 11 where each chain's edges are watched from the other chain.

    Upper chain 1-2-4-6-8-10-11, lower chain 1-3-5-7-9-11, rungs 2-3, 4-5, 6-7, 8-9 and 9-10. Every forward chain
    edge after the first is watched by a node of the opposite chain, and full overwatch brings its cost from 20 to
    the unit floor. All robots must reach node 11.

    Args:
        horizon (int): Number of time steps. Defaults to 10.
        n_robots (int): Team size. Defaults to 2.

    Returns:
        tuple[TopoGraph, Scenario]: 43 locations and 8 overwatch opportunities.
    """
    nodes = {1: (0.0, 0.0), 11: (60.0, 0.0)}
    for i, v in enumerate((2, 4, 6, 8, 10)):
        nodes[v] = (10.0 * (i + 1), 10.0)
    for i, v in enumerate((3, 5, 7, 9)):
        nodes[v] = (10.0 * (i + 1), -10.0)

    upper = [(1, 2), (2, 4), (4, 6), (6, 8), (8, 10), (10, 11)]
    lower = [(1, 3), (3, 5), (5, 7), (7, 9), (9, 11)]
    rungs = [(2, 3), (4, 5), (6, 7), (8, 9), (9, 10)]
    watched = [
        (3, (2, 4)),
        (4, (3, 5)),
        (5, (4, 6)),
        (6, (5, 7)),
        (7, (6, 8)),
        (8, (7, 9)),
        (9, (8, 10)),
        (10, (9, 11)),
    ]

    overwatch = [OverwatchOpportunity(watcher=v, edge=e, omega=19.0, alpha=1, gamma=0.0) for v, e in watched]
    graph = TopoGraph.build(nodes, upper + lower + rungs, overwatch=overwatch, bidirectional=True)
    params = {e: EdgeCostParams(w_bar=20.0) for e in graph.traversal_edges}
    scenario = Scenario(
        n_robots=n_robots,
        horizon=horizon,
        starts={(1, 1): n_robots},
        goals={(11, 11): n_robots},
        edge_params=params,
        time_weight=0.1,
    )
    return graph, scenario


def random_instance(
    n_nodes: int,
    density: float,
    n_robots: int,
    seed: int,
    n_goal: int = 1,
    horizon: int | None = None,
    max_horizon: int | None = None,
    overwatch_fraction: float = 0.4,
    max_overwatch_per_edge: int = 2,
    max_cost: int = 20,
    time_weight: float = 1.0,
) -> tuple[TopoGraph, Scenario]:
    """Random connected benchmark instance with integer costs.

    Nodes are scattered uniformly over a 100 m square. A random spanning tree guarantees connectivity, then random
    node pairs are joined until ``density`` of all pairs are edges (in both directions). A fraction of the directed
    edges receive up to ``max_overwatch_per_edge`` overwatch opportunities from nodes off the edge. The team starts
    at one of the two nodes furthest apart and the goal is the other one. Unless given, the horizon is twice the
    shortest hop count, and at least the hop count plus two so the goal node can be reached.

    Args:
        n_nodes (int): Number of nodes (at least 2).
        density (float): Fraction of node pairs joined by an edge, in (0, 1].
        n_robots (int): Team size.
        seed (int): Random seed.
        n_goal (int): Robots required at the goal. Defaults to 1.
        horizon (int | None): Number of time steps. Defaults to None (derived from the hop count).
        max_horizon (int | None): Upper bound on the derived horizon. Defaults to None.
        overwatch_fraction (float): Fraction of edges with overwatch opportunities. Defaults to 0.4.
        max_overwatch_per_edge (int): Maximum opportunities per edge. Defaults to 2.
        max_cost (int): Maximum fixed edge cost. Defaults to 20.
        time_weight (float): Time cost weight. Defaults to 1.

    Returns:
        tuple[TopoGraph, Scenario]: The instance.

    Raises:
        ValueError: If ``n_nodes < 2`` or ``density`` is outside (0, 1].
    """
    if n_nodes < 2:
        raise ValueError("Random instances need at least 2 nodes!")
    if not 0 < density <= 1:
        raise ValueError(f"Edge density must be in (0, 1], got {density}!")

    rng = np.random.default_rng(seed)
    ids = list(range(1, n_nodes + 1))
    coords = rng.uniform(0.0, 100.0, size=(n_nodes, 2))
    nodes = {v: (float(x), float(y)) for v, (x, y) in zip(ids, coords, strict=True)}

    order = [ids[i] for i in rng.permutation(n_nodes)]
    pairs = set()
    for i in range(1, n_nodes):
        parent = order[int(rng.integers(0, i))]
        pairs.add(tuple(sorted((order[i], parent))))
    n_pairs = max(n_nodes - 1, round(density * n_nodes * (n_nodes - 1) / 2))
    candidates = [p for p in itertools.combinations(ids, 2) if p not in pairs]
    for i in rng.permutation(len(candidates)):
        if len(pairs) >= n_pairs:
            break
        pairs.add(candidates[i])

    directed = sorted({*pairs, *((k, j) for j, k in pairs)})
    params = {}
    for edge in directed:
        m = int(rng.integers(0, 4))
        params[edge] = EdgeCostParams(
            w_bar=float(rng.integers(1, max_cost + 1)),
            a=int(rng.integers(1, 3)),
            m=float(m),
            r=float(rng.integers(0, m + 1)),
        )

    overwatch = []
    for edge in directed:
        if rng.random() >= overwatch_fraction:
            continue
        watchers = [v for v in ids if v not in edge]
        if not watchers:
            continue
        n_watch = min(int(rng.integers(1, max_overwatch_per_edge + 1)), len(watchers))
        for watcher in sorted(int(v) for v in rng.choice(watchers, size=n_watch, replace=False)):
            omega = int(rng.integers(1, int(params[edge].w_bar) + 1))
            alpha = int(rng.integers(1, 3))
            gamma = int(rng.integers(0, math.floor(omega / alpha) + 1))
            overwatch.append(
                OverwatchOpportunity(watcher=watcher, edge=edge, omega=float(omega), alpha=alpha, gamma=float(gamma))
            )

    dists = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
    i_start, i_goal = np.unravel_index(np.argmax(dists), dists.shape)
    start, goal = ids[int(i_start)], ids[int(i_goal)]
    hops = nx.shortest_path_length(nx.Graph(list(pairs)), start, goal)
    if horizon is None:
        horizon = max(2 * hops, hops + 2)
        if max_horizon is not None:
            horizon = max(hops + 2, min(horizon, max_horizon))

    graph = TopoGraph.build(nodes, directed, overwatch=overwatch)
    scenario = Scenario(
        n_robots=n_robots,
        horizon=horizon,
        starts={(start, start): n_robots},
        goals={(goal, goal): min(n_goal, n_robots)},
        edge_params=params,
        time_weight=time_weight,
    )
    logger.debug(f"Random instance seed={seed}: {graph!r}, start {start}, goal {goal}, horizon {horizon}")
    return graph, scenario
