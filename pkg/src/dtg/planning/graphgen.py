# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Dynamic topological graphs generated from terrain.

The pipeline is:

1. visibility map of the terrain from the observer distribution;
2. cover mask, cover regions larger than ``xi_min`` and split to at most ``xi_max`` cells;
3. one node per region and least-visible paths between nodes, pruned and reconnected;
4. one overwatch map per node, seen from observers standing anywhere in its region, and the overwatch weight of
   every path under it;
5. refinement into a ``TopoGraph`` with edge costs and overwatch opportunities.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import xarray as xr

from dtg.planning.graph import Edge, EdgeCostParams, OverwatchOpportunity, TopoGraph
from dtg.planning.paths import EPSILON, PathTable, compute_paths, path_cost
from dtg.planning.rasters import ElevationGrid, ObstacleMask, VisibilityMap
from dtg.planning.regions import CoverRegion, get_cover_regions, place_nodes, region_labels, split_regions
from dtg.planning.visibility import (
    DEFAULT_EYE_HEIGHT,
    ObserverDistribution,
    UniformRegionObserver,
    compute_visibility_map,
    get_cover_mask,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GraphGenParams:
    """Parameters of graph generation.

    Args:
        n_samples (int): Observer samples for the visibility map.
        nu (float): Visibility threshold below which a cell is cover.
        xi_min (int): Regions must be larger than this many cells.
        xi_max (int): Regions are split down to at most this many cells.
        lambda_p (float): Weight of the detection cost in path planning.
        d_max (float): Distance in metres at which visibility fades to zero.
        epsilon (float): Floor on the non-detection probability.
        eye_height (float): Eye height in metres of robots watching from a node.
        ow_samples (int): Observer samples per overwatch map.
    """

    n_samples: int = 32
    nu: float = 0.3
    xi_min: int = 20
    xi_max: int = 200
    lambda_p: float = 1.0
    d_max: float = 80.0
    epsilon: float = EPSILON
    eye_height: float = DEFAULT_EYE_HEIGHT
    ow_samples: int = 16


@dataclass(frozen=True)
class RefineParams:
    """Parameters turning raw paths and overwatch weights into a planning graph.

    Args:
        max_edge_len (float): Longer paths are dropped, in metres.
        max_ow_dist (float): Watchers further than this from both ends of an edge are ignored, in metres.
        ow_scale (float): Multiplier applied to overwatch weights.
        min_frac (float): Opportunities must reduce the edge cost by at least this fraction.
        max_frac (float): Reductions are capped at this fraction of the edge cost.
        alpha (int): Robots giving full overwatch.
        gamma (float): Extra benefit per watching robot beyond ``alpha``.
        min_edge_weight (float): Floor on the fixed edge cost.
    """

    max_edge_len: float = np.inf
    max_ow_dist: float = np.inf
    ow_scale: float = 1.0
    min_frac: float = 0.4
    max_frac: float = 0.9
    alpha: int = 2
    gamma: float = 0.0
    min_edge_weight: float = 1.0


@dataclass(eq=False)
class OverwatchTable:
    """Overwatch weight of every path, per watching node, and the overwatch maps they come from."""

    weights: dict[int, dict[Edge, float]] = field(default_factory=dict)
    maps: dict[int, VisibilityMap] = field(default_factory=dict)


@dataclass(eq=False)
class GeneratedGraph:
    """Everything produced while generating a graph from terrain."""

    visibility: VisibilityMap
    cover_mask: np.ndarray
    regions: list[CoverRegion]
    node_cells: list[tuple[int, int]]
    paths: PathTable
    overwatch: OverwatchTable
    graph: TopoGraph
    edge_params: dict[Edge, EdgeCostParams]
    terrain: xr.Dataset


def compute_overwatch(
    dem: ElevationGrid,
    regions: list[CoverRegion],
    path_table: PathTable,
    n_samples: int,
    d_max: float,
    seed: int = 0,
    eye_height: float = DEFAULT_EYE_HEIGHT,
    eps: float = EPSILON,
) -> OverwatchTable:
    """Overwatch weights of the paths, seen from each node's region.

    For node ``v`` the overwatch map is the visibility map of observers drawn uniformly from the cells of region
    ``v``. The weight of path ``(j, k)`` for watcher ``v`` is the path cost of the path under that map. Paths
    starting or ending at ``v`` get no weight.

    Args:
        dem (ElevationGrid): Terrain.
        regions (list[CoverRegion]): Regions, region ``i - 1`` belonging to node ``i``.
        path_table (PathTable): Paths between nodes.
        n_samples (int): Observer samples per map.
        d_max (float): Distance in metres at which visibility fades to zero.
        seed (int): Random seed; node ``v`` uses the seed sequence ``[seed, v]``. Defaults to 0.
        eye_height (float): Eye height in metres. Defaults to 1.5.
        eps (float): Floor on the non-detection probability. Defaults to 1e-6.

    Returns:
        OverwatchTable: Weights and maps per node.
    """
    table = OverwatchTable()
    for v, region in enumerate(regions, start=1):
        observers = UniformRegionObserver(dem, region.cells, eye_height=eye_height)
        overwatch_map = compute_visibility_map(dem, observers, n_samples, d_max, seed=[seed, v])
        table.maps[v] = overwatch_map
        table.weights[v] = {
            pair: path_cost(overwatch_map, cells, eps) for pair, cells in path_table.paths.items() if v not in pair
        }
    logger.info(f"Computed overwatch maps for {len(regions)} nodes")
    return table


def refine_graph(
    node_points: dict[int, tuple[float, float]],
    path_table: PathTable,
    overwatch: OverwatchTable,
    params: RefineParams,
    edge_polylines: dict[Edge, np.ndarray] | None = None,
) -> tuple[TopoGraph, dict[Edge, EdgeCostParams]]:
    """Builds the planning graph from raw paths and overwatch weights.

    Edges keep the path's detection cost as their fixed cost, floored at ``min_edge_weight``. An overwatch
    opportunity of watcher ``v`` on edge ``e`` is kept when ``v`` lies within ``max_ow_dist`` of one end of ``e``
    and the scaled weight ``ow_scale * W`` is at least ``min_frac * w_bar``; its benefit is the scaled weight
    capped at ``max_frac * w_bar``.

    Args:
        node_points (dict[int, tuple[float, float]]): World coordinates of each node.
        path_table (PathTable): Paths between nodes.
        overwatch (OverwatchTable): Overwatch weights.
        params (RefineParams): Refinement parameters.
        edge_polylines (dict[Edge, np.ndarray] | None): World polyline of each path. Defaults to None.

    Returns:
        tuple[TopoGraph, dict[Edge, EdgeCostParams]]: The graph and the cost parameters of its edges.

    Raises:
        ValueError: If a fraction lies outside (0, 1] or ``min_frac > max_frac``.
    """
    for name in ("min_frac", "max_frac"):
        value = getattr(params, name)
        if not 0 < value <= 1:
            raise ValueError(f"{name} must lie in (0, 1], got {value}!")
    if params.min_frac > params.max_frac:
        raise ValueError(f"min_frac {params.min_frac} exceeds max_frac {params.max_frac}!")

    edges = [pair for pair in sorted(path_table.paths) if path_table.lengths[pair] <= params.max_edge_len]
    edge_params = {
        e: EdgeCostParams(w_bar=max(path_table.costs[e], params.min_edge_weight)) for e in edges
    }

    points = {v: np.asarray(p, dtype=float) for v, p in node_points.items()}
    opportunities = []
    for watcher in sorted(overwatch.weights):
        for edge in edges:
            if watcher in edge or edge not in overwatch.weights[watcher]:
                continue
            distance = min(np.linalg.norm(points[watcher] - points[end]) for end in edge)
            if distance > params.max_ow_dist:
                continue
            w_bar = edge_params[edge].w_bar
            benefit = params.ow_scale * overwatch.weights[watcher][edge]
            if benefit < params.min_frac * w_bar:
                continue
            omega = min(benefit, params.max_frac * w_bar)
            opportunities.append(
                OverwatchOpportunity(
                    watcher=watcher,
                    edge=edge,
                    omega=omega,
                    alpha=params.alpha,
                    gamma=min(params.gamma, omega / params.alpha),
                )
            )

    paths = {e: edge_polylines[e] for e in edges} if edge_polylines is not None else None
    graph = TopoGraph.build(node_points, edges, edge_paths=paths, overwatch=opportunities)
    logger.info(f"Refined {len(path_table.paths)} paths into {graph!r}")
    return graph, edge_params


def terrain_dataset(
    dem: ElevationGrid, obstacles: ObstacleMask, vis: VisibilityMap, cover: np.ndarray, regions: list[CoverRegion]
) -> xr.Dataset:
    """Co-registered terrain layers as one Dataset with pint units."""
    return xr.Dataset(
        data_vars={
            "elevation": dem.as_dataarray(),
            "obstacles": obstacles.as_dataarray(),
            "visibility": vis.as_dataarray(),
            "cover": vis.with_data(cover.astype(float)).as_dataarray(),
            "region": vis.with_data(region_labels(regions, dem.shape).astype(float)).as_dataarray(),
        },
        attrs={"resolution": dem.resolution},
    )


def generate_graph(
    dem: ElevationGrid,
    obstacles: ObstacleMask,
    observers: ObserverDistribution,
    params: GraphGenParams | None = None,
    refine: RefineParams | None = None,
    seed: int = 0,
) -> GeneratedGraph:
    """Generates a planning graph from terrain.

    Args:
        dem (ElevationGrid): Terrain, occluders included.
        obstacles (ObstacleMask): Untraversable cells.
        observers (ObserverDistribution): Where the observer may be.
        params (GraphGenParams | None): Generation parameters. Defaults to None (defaults).
        refine (RefineParams | None): Refinement parameters. Defaults to None (defaults).
        seed (int): Random seed. Defaults to 0.

    Returns:
        GeneratedGraph: All intermediate products and the final graph.

    Raises:
        ValueError: If the grids are not co-registered or fewer than two cover regions are found.
    """
    params = params or GraphGenParams()
    refine = refine or RefineParams()
    if dem.shape != obstacles.shape or dem.resolution != obstacles.resolution:
        raise ValueError(f"Obstacle mask {obstacles!r} is not co-registered with {dem!r}!")

    vis = compute_visibility_map(dem, observers, params.n_samples, params.d_max, seed=seed)
    cover = get_cover_mask(vis, params.nu, obstacles)
    regions = split_regions(get_cover_regions(cover, params.xi_min), params.xi_max, params.xi_min)
    if len(regions) < 2:
        raise ValueError(f"Found {len(regions)} cover region(s), at least 2 are needed to build a graph!")
    node_cells = place_nodes(regions, obstacles.data)
    logger.info(f"Found {len(regions)} cover regions")

    table = compute_paths(vis, obstacles.data, regions, node_cells, params.lambda_p, dem.resolution, params.epsilon)
    overwatch = compute_overwatch(
        dem, regions, table, params.ow_samples, params.d_max, seed, params.eye_height, params.epsilon
    )
    node_points = {
        v: tuple(float(c) for c in dem.cell_centers(cell)[0]) for v, cell in enumerate(node_cells, start=1)
    }
    polylines = {pair: dem.cell_centers(cells) for pair, cells in table.paths.items()}
    graph, edge_params = refine_graph(node_points, table, overwatch, refine, polylines)

    return GeneratedGraph(
        visibility=vis,
        cover_mask=cover,
        regions=regions,
        node_cells=node_cells,
        paths=table,
        overwatch=overwatch,
        graph=graph,
        edge_params=edge_params,
        terrain=terrain_dataset(dem, obstacles, vis, cover, regions),
    )
