# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""JSON documents for graphs, scenarios, solutions, routes and graph generation products.

Documents are written with sorted keys and a fixed indent so identical objects give identical bytes. Locations
are ``[j, k]`` pairs; mappings keyed by locations are written as lists of ``{"location": [j, k], ...}`` objects.
"""

import json
import logging
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from dtg.planning.allocation import RobotRoutes
from dtg.planning.graph import Edge, EdgeCostParams, OverwatchOpportunity, Scenario, TopoGraph
from dtg.planning.graphgen import GeneratedGraph
from dtg.planning.model import OccupancySolution

logger = logging.getLogger(__name__)


def _edge(value) -> Edge:
    j, k = value
    return int(j), int(k)


def _counts_to_list(counts: Mapping[Edge, int]) -> list[dict]:
    return [{"location": list(loc), "count": int(n)} for loc, n in sorted(counts.items())]


def _counts_from_list(items: list[dict]) -> dict[Edge, int]:
    return {_edge(item["location"]): int(item["count"]) for item in items}


def graph_to_dict(graph: TopoGraph) -> dict:
    return {
        "nodes": [{"id": v, "x": x, "y": y} for v, (x, y) in sorted(graph.nodes.items())],
        "edges": [list(e) for e in graph.edges],
        "edge_paths": [
            {"edge": list(e), "points": np.asarray(path, dtype=float).tolist()}
            for e, path in sorted(graph.edge_paths.items())
        ],
        "overwatch": [
            {"watcher": o.watcher, "edge": list(o.edge), "omega": o.omega, "alpha": o.alpha, "gamma": o.gamma}
            for o in graph.overwatch
        ],
    }


def graph_from_dict(data: Mapping) -> TopoGraph:
    """Reads a graph document. Edges are kept exactly as written.

    Raises:
        KeyError: If a required field is missing.
    """
    return TopoGraph(
        nodes={int(n["id"]): (float(n["x"]), float(n["y"])) for n in data["nodes"]},
        edges=tuple(_edge(e) for e in data["edges"]),
        edge_paths={_edge(p["edge"]): np.asarray(p["points"], dtype=float) for p in data.get("edge_paths", [])},
        overwatch=tuple(
            OverwatchOpportunity(
                watcher=int(o["watcher"]),
                edge=_edge(o["edge"]),
                omega=float(o["omega"]),
                alpha=int(o.get("alpha", 2)),
                gamma=float(o.get("gamma", 0.0)),
            )
            for o in data.get("overwatch", [])
        ),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "n_robots": scenario.n_robots,
        "horizon": scenario.horizon,
        "starts": _counts_to_list(scenario.starts),
        "goals": _counts_to_list(scenario.goals),
        "time_weight": scenario.time_weight,
        "edge_params": [
            {"location": list(e), "w_bar": p.w_bar, "a": p.a, "m": p.m, "r": p.r}
            for e, p in sorted(scenario.edge_params.items())
        ],
    }


def scenario_from_dict(data: Mapping) -> Scenario:
    return Scenario(
        n_robots=int(data["n_robots"]),
        horizon=int(data["horizon"]),
        starts=_counts_from_list(data["starts"]),
        goals=_counts_from_list(data.get("goals", [])),
        edge_params={
            _edge(p["location"]): EdgeCostParams(
                w_bar=float(p["w_bar"]), a=int(p.get("a", 1)), m=float(p.get("m", 0.0)), r=float(p.get("r", 0.0))
            )
            for p in data.get("edge_params", [])
        },
        time_weight=float(data.get("time_weight", 1.0)),
    )


def solution_to_dict(solution: OccupancySolution) -> dict:
    return {
        "objective": solution.objective,
        "locations": [list(loc) for loc in solution.locations],
        "traversal_edges": [list(e) for e in solution.traversal_edges],
        "p": np.asarray(solution.p, dtype=int).tolist(),
        "phi": np.asarray(solution.phi, dtype=int).tolist(),
        "psi": np.asarray(solution.psi, dtype=int).tolist(),
        "c_trav": np.asarray(solution.c_trav, dtype=float).tolist(),
        "c_ow": np.asarray(solution.c_ow, dtype=float).reshape(-1, solution.horizon).tolist(),
    }


def solution_from_dict(data: Mapping) -> OccupancySolution:
    p = np.asarray(data["p"], dtype=int)
    horizon = p.shape[1]
    return OccupancySolution(
        locations=tuple(_edge(loc) for loc in data["locations"]),
        traversal_edges=tuple(_edge(e) for e in data["traversal_edges"]),
        p=p,
        phi=np.asarray(data["phi"], dtype=int).reshape(-1, horizon),
        psi=np.asarray(data["psi"], dtype=int),
        c_trav=np.asarray(data["c_trav"], dtype=float).reshape(-1, horizon),
        c_ow=np.asarray(data["c_ow"], dtype=float).reshape(-1, horizon),
        objective=float(data["objective"]),
    )


def routes_to_dict(routes: RobotRoutes) -> dict:
    return {"robots": list(routes.robots), "routes": routes.to_dict()}


def routes_from_dict(data: Mapping) -> RobotRoutes:
    robots = tuple(data["robots"])
    return RobotRoutes(
        robots=robots, routes=tuple(tuple(_edge(loc) for loc in data["routes"][robot]) for robot in robots)
    )


def generated_to_dict(generated: GeneratedGraph) -> dict:
    """Regions, nodes and paths of a generated graph, in grid cells."""
    table = generated.paths
    return {
        "regions": [{"id": r.id, "cells": r.cells.tolist()} for r in generated.regions],
        "nodes": [{"id": v, "cell": list(cell)} for v, cell in enumerate(generated.node_cells, start=1)],
        "paths": [
            {"edge": list(pair), "cells": cells.tolist(), "cost": table.costs[pair], "length": table.lengths[pair]}
            for pair, cells in sorted(table.paths.items())
        ],
        "disconnected": list(table.disconnected),
        "overwatch_weights": [
            {"watcher": v, "edge": list(pair), "weight": w}
            for v, weights in sorted(generated.overwatch.weights.items())
            for pair, w in sorted(weights.items())
        ],
    }


def dumps(document: Mapping) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_json(document: Mapping, path: Path):
    """Writes a document, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(document))
    logger.debug(f"Wrote {path}")


def read_json(path: Path) -> dict:
    """Reads a document.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the file is not valid JSON.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {path}: {e}") from e
