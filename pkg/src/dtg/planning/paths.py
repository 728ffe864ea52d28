# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Least-visible paths between cover regions.

Paths are sequences of 8-adjacent ``(row, col)`` cells. A step from ``a`` to ``b`` costs
``|a - b| * resolution * (1 + lambda_p * n(b))`` where ``n = -log(max(1 - P, eps))`` is the detection cost of
the cell entered. Diagonal moves may cut corners.
"""

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from dtg.planning.rasters import Raster
from dtg.planning.regions import CoverRegion, region_labels

logger = logging.getLogger(__name__)

EPSILON = 1e-6

_MOVES = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc)


class NoPathError(RuntimeError):
    """Raised when no obstacle-free path joins two cells."""


def _values(grid: Raster | np.ndarray) -> np.ndarray:
    return np.asarray(grid.data if isinstance(grid, Raster) else grid, dtype=float)


def detection_cost(prob: np.ndarray | float, eps: float = EPSILON) -> np.ndarray:
    """Negative log probability of not being detected, ``-log(max(1 - P, eps))``."""
    return -np.log(np.maximum(1.0 - np.asarray(prob, dtype=float), eps))


def path_cost(prob_map: Raster | np.ndarray, cells: np.ndarray, eps: float = EPSILON) -> float:
    """Sum of the detection costs of the cells of a path.

    Args:
        prob_map (Raster | np.ndarray): Visibility or overwatch map.
        cells (np.ndarray): ``(k, 2)`` path cells.
        eps (float): Floor on the non-detection probability. Defaults to 1e-6.

    Returns:
        float: Nonnegative path cost.
    """
    cells = np.asarray(cells, dtype=int).reshape(-1, 2)
    values = _values(prob_map)[cells[:, 0], cells[:, 1]]
    return float(detection_cost(values, eps).sum())


def path_length(cells: np.ndarray, resolution: float = 1.0) -> float:
    """Length in metres of the polyline through the cell centres."""
    cells = np.asarray(cells, dtype=float).reshape(-1, 2)
    return float(np.linalg.norm(np.diff(cells, axis=0), axis=1).sum() * resolution)


def travel_cost(
    cells: np.ndarray, vis: Raster | np.ndarray, lambda_p: float, resolution: float = 1.0, eps: float = EPSILON
) -> float:
    """Cost of a path under the A* step cost."""
    cells = np.asarray(cells, dtype=int).reshape(-1, 2)
    if len(cells) < 2:
        return 0.0
    steps = np.linalg.norm(np.diff(cells, axis=0), axis=1) * resolution
    n = detection_cost(_values(vis)[cells[1:, 0], cells[1:, 1]], eps)
    return float(np.sum(steps * (1.0 + lambda_p * n)))


def compute_one_path(
    obstacles: np.ndarray,
    vis: Raster | np.ndarray,
    start: tuple[int, int],
    goal: tuple[int, int],
    lambda_p: float,
    resolution: float = 1.0,
    eps: float = EPSILON,
) -> np.ndarray:
    """Least-cost path between two cells, by A* with the Euclidean distance heuristic.

    Args:
        obstacles (np.ndarray): Boolean obstacle grid.
        vis (Raster | np.ndarray): Visibility map.
        start (tuple[int, int]): Start cell.
        goal (tuple[int, int]): Goal cell.
        lambda_p (float): Weight of the detection cost.
        resolution (float): Cell size in metres. Defaults to 1.
        eps (float): Floor on the non-detection probability. Defaults to 1e-6.

    Returns:
        np.ndarray: ``(k, 2)`` cells from start to goal inclusive.

    Raises:
        ValueError: If an endpoint is outside the grid or on an obstacle.
        NoPathError: If the goal cannot be reached.
    """
    blocked = np.asarray(obstacles, dtype=bool)
    nrows, ncols = blocked.shape
    start, goal = (int(start[0]), int(start[1])), (int(goal[0]), int(goal[1]))
    for name, cell in (("start", start), ("goal", goal)):
        if not (0 <= cell[0] < nrows and 0 <= cell[1] < ncols):
            raise ValueError(f"Path {name} {cell} is outside the {nrows} x {ncols} grid!")
        if blocked[cell]:
            raise ValueError(f"Path {name} {cell} is an obstacle!")

    n = detection_cost(_values(vis), eps)
    weight = 1.0 + lambda_p * n

    def heuristic(cell: tuple[int, int]) -> float:
        return math.hypot(cell[0] - goal[0], cell[1] - goal[1]) * resolution

    sequence = itertools.count()
    best = {start: 0.0}
    came_from: dict[tuple[int, int], tuple[int, int] | None] = {start: None}
    closed: set[tuple[int, int]] = set()
    frontier = [(heuristic(start), next(sequence), start)]
    while frontier:
        _, _, cell = heapq.heappop(frontier)
        if cell in closed:
            continue
        if cell == goal:
            path = []
            node: tuple[int, int] | None = cell
            while node is not None:
                path.append(node)
                node = came_from[node]
            return np.array(path[::-1], dtype=int)
        closed.add(cell)
        for dr, dc in _MOVES:
            nxt = (cell[0] + dr, cell[1] + dc)
            if not (0 <= nxt[0] < nrows and 0 <= nxt[1] < ncols) or blocked[nxt] or nxt in closed:
                continue
            g = best[cell] + math.hypot(dr, dc) * resolution * weight[nxt]
            if g < best.get(nxt, math.inf):
                best[nxt] = g
                came_from[nxt] = cell
                heapq.heappush(frontier, (g + heuristic(nxt), next(sequence), nxt))
    raise NoPathError(f"No obstacle-free path from {start} to {goal}!")


@dataclass(eq=False)
class PathTable:
    """Paths between graph nodes after pruning.

    Args:
        paths (dict): ``(j, k)`` -> ``(k, 2)`` cells of the path from node ``j`` to node ``k``.
        costs (dict): ``(j, k)`` -> detection cost of the path.
        lengths (dict): ``(j, k)`` -> length in metres.
        disconnected (tuple[int, ...]): Nodes left without incoming or outgoing paths.
    """

    paths: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    costs: dict[tuple[int, int], float] = field(default_factory=dict)
    lengths: dict[tuple[int, int], float] = field(default_factory=dict)
    disconnected: tuple[int, ...] = ()

    def in_degree(self, node: int) -> int:
        return sum(1 for _, k in self.paths if k == node)

    def out_degree(self, node: int) -> int:
        return sum(1 for j, _ in self.paths if j == node)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(paths={len(self.paths)}, disconnected={self.disconnected})"


def _is_redundant(cells: np.ndarray, labels: np.ndarray, own: tuple[int, int]) -> bool:
    passed = labels[cells[:, 0], cells[:, 1]]
    return bool(np.any((passed != 0) & (passed != own[0]) & (passed != own[1])))


def compute_paths(
    vis: Raster | np.ndarray,
    obstacles: np.ndarray,
    regions: list[CoverRegion],
    nodes: list[tuple[int, int]],
    lambda_p: float,
    resolution: float = 1.0,
    eps: float = EPSILON,
) -> PathTable:
    """All-pairs least-visible paths between region nodes, pruned and reconnected.

    A path that passes through a region other than the two it connects is redundant and removed. Each node
    remembers the cheapest removed path leaving it and the cheapest removed path entering it. Nodes left without
    outgoing or incoming paths then get those back, in ascending node order, until every node that has any path
    at all is both a source and a sink of some kept path. Remaining nodes are reported as disconnected.

    Node ``i`` is the node of ``regions[i - 1]``.

    Args:
        vis (Raster | np.ndarray): Visibility map.
        obstacles (np.ndarray): Boolean obstacle grid.
        regions (list[CoverRegion]): Cover regions.
        nodes (list[tuple[int, int]]): Node cell of each region.
        lambda_p (float): Weight of the detection cost in A*.
        resolution (float): Cell size in metres. Defaults to 1.
        eps (float): Floor on the non-detection probability. Defaults to 1e-6.

    Returns:
        PathTable: The kept paths.
    """
    values = _values(vis)
    labels = region_labels(regions, values.shape)
    ids = [region.id for region in regions]
    owner = {node_id: region.id for node_id, region in zip(range(1, len(regions) + 1), regions, strict=True)}

    raw: dict[tuple[int, int], np.ndarray] = {}
    for j, k in itertools.permutations(range(1, len(nodes) + 1), 2):
        try:
            raw[(j, k)] = compute_one_path(obstacles, values, nodes[j - 1], nodes[k - 1], lambda_p, resolution, eps)
        except NoPathError:
            logger.debug(f"No path from node {j} to node {k}")
    costs = {pair: path_cost(values, cells, eps) for pair, cells in raw.items()}

    kept: set[tuple[int, int]] = set()
    path_from: dict[int, tuple[int, int]] = {}
    path_to: dict[int, tuple[int, int]] = {}
    for (j, k), cells in sorted(raw.items()):
        if not _is_redundant(cells, labels, (owner[j], owner[k])):
            kept.add((j, k))
            continue
        if j not in path_from or costs[(j, k)] < costs[path_from[j]]:
            path_from[j] = (j, k)
        if k not in path_to or costs[(j, k)] < costs[path_to[k]]:
            path_to[k] = (j, k)
    logger.debug(f"Pruned {len(raw) - len(kept)} redundant paths out of {len(raw)}")

    changed = True
    while changed:
        changed = False
        for v in range(1, len(nodes) + 1):
            if not any(j == v for j, _ in kept) and v in path_from and path_from[v] not in kept:
                kept.add(path_from[v])
                changed = True
            if not any(k == v for _, k in kept) and v in path_to and path_to[v] not in kept:
                kept.add(path_to[v])
                changed = True

    disconnected = tuple(
        v for v in range(1, len(nodes) + 1) if not any(v in pair for pair in kept)
    )
    if disconnected:
        logger.warning(f"Nodes {list(disconnected)} could not be connected to the graph")
    table = PathTable(
        paths={pair: raw[pair] for pair in sorted(kept)},
        costs={pair: costs[pair] for pair in sorted(kept)},
        lengths={pair: path_length(raw[pair], resolution) for pair in sorted(kept)},
        disconnected=disconnected,
    )
    logger.info(f"Computed {table!r} between {len(ids)} regions")
    return table
