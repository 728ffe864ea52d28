# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Cover regions: connected areas of low visibility that robots can hide in.

Connectivity is 8-neighbour throughout. Regions are numbered from 1, in the order of their first cell in
row-major order.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True, eq=False)
class CoverRegion:
    """A connected set of cells.

    Args:
        id (int): Region number, from 1.
        cells (np.ndarray): ``(k, 2)`` array of ``(row, col)`` cells in row-major order.
    """

    id: int
    cells: np.ndarray

    @property
    def area(self) -> int:
        """Number of cells."""
        return len(self.cells)

    @cached_property
    def centroid(self) -> np.ndarray:
        """Mean ``(row, col)`` of the cells."""
        return self.cells.mean(axis=0)

    def mask(self, shape: tuple[int, int]) -> np.ndarray:
        mask = np.zeros(shape, dtype=bool)
        mask[self.cells[:, 0], self.cells[:, 1]] = True
        return mask

    def __repr__(self) -> str:
        return f"{type(self).__name__}(id={self.id}, area={self.area})"


def _sorted_cells(cells: np.ndarray) -> np.ndarray:
    cells = np.asarray(cells, dtype=int).reshape(-1, 2)
    return cells[np.lexsort((cells[:, 1], cells[:, 0]))]


def _components(cells: np.ndarray) -> list[np.ndarray]:
    """Splits a set of cells into 8-connected components."""
    if len(cells) == 0:
        return []
    lo = cells.min(axis=0)
    local = cells - lo
    mask = np.zeros(local.max(axis=0) + 1, dtype=bool)
    mask[local[:, 0], local[:, 1]] = True
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    return [_sorted_cells(np.argwhere(labels == i) + lo) for i in range(1, n + 1)]


def _renumber(pieces: list[np.ndarray]) -> list[CoverRegion]:
    ordered = sorted(pieces, key=lambda cells: (int(cells[0, 0]), int(cells[0, 1])))
    return [CoverRegion(id=i, cells=cells) for i, cells in enumerate(ordered, start=1)]


def region_labels(regions: list[CoverRegion], shape: tuple[int, int]) -> np.ndarray:
    """Grid holding the id of the region each cell belongs to, 0 outside all regions."""
    labels = np.zeros(shape, dtype=int)
    for region in regions:
        labels[region.cells[:, 0], region.cells[:, 1]] = region.id
    return labels


def get_cover_regions(mask: np.ndarray, xi_min: int) -> list[CoverRegion]:
    """Connected components of a cover mask with more than ``xi_min`` cells.

    Args:
        mask (np.ndarray): Boolean cover mask.
        xi_min (int): Area threshold in cells. Components of exactly this size are discarded.

    Returns:
        list[CoverRegion]: The regions.
    """
    labels, n = ndimage.label(np.asarray(mask, dtype=bool), structure=EIGHT_CONNECTED)
    if n == 0:
        return []
    areas = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
    pieces = [_sorted_cells(np.argwhere(labels == i)) for i in range(1, n + 1) if areas[i - 1] > xi_min]
    logger.debug(f"Kept {len(pieces)} of {n} cover components larger than {xi_min} cells")
    return _renumber(pieces)


def _straight_cut(local: np.ndarray, xi_max: int) -> tuple[int, np.ndarray] | None:
    """Shortest straight cut leaving a first piece of at most ``xi_max`` cells, as (cut length, piece mask).

    Rows and columns are swept from both ends; the piece is the largest run of whole rows or columns that fits.
    The cut length is the number of region cells in the first row or column left out. Ties go to the larger
    piece, then to the sweep order rows-forward, rows-backward, columns-forward, columns-backward.
    """
    best: tuple[int, int, int, np.ndarray] | None = None
    for order, (axis, reverse) in enumerate(((1, False), (1, True), (0, False), (0, True))):
        counts = local.sum(axis=axis)
        if reverse:
            counts = counts[::-1]
        cumulative = np.cumsum(counts)
        fits = np.flatnonzero(cumulative <= xi_max)
        if fits.size == 0 or fits[-1] + 1 >= len(counts):
            continue
        last = int(fits[-1])
        if cumulative[last] == 0:
            continue
        cut_length = int(counts[last + 1])
        piece = np.zeros_like(local)
        index = np.arange(len(counts))
        keep = index[::-1] <= last if reverse else index <= last
        if axis == 1:
            piece[keep, :] = local[keep, :]
        else:
            piece[:, keep] = local[:, keep]
        key = (cut_length, -int(cumulative[last]), order)
        if best is None or key < best[:3]:
            best = (*key, piece)
    return None if best is None else (best[0], best[3])


def _cut(cells: np.ndarray, xi_max: int) -> list[np.ndarray]:
    lo = cells.min(axis=0)
    local_cells = cells - lo
    local = np.zeros(local_cells.max(axis=0) + 1, dtype=bool)
    local[local_cells[:, 0], local_cells[:, 1]] = True

    cut = _straight_cut(local, xi_max)
    if cut is not None:
        piece = cut[1]
    else:
        # Jogged sweep: the first xi_max cells in row-major order
        piece = np.zeros_like(local)
        first = local_cells[:xi_max]
        piece[first[:, 0], first[:, 1]] = True
    rest = local & ~piece
    return [_sorted_cells(np.argwhere(part) + lo) for part in (piece, rest)]


def split_regions(regions: list[CoverRegion], xi_max: int, xi_min: int = 0) -> list[CoverRegion]:
    """Cuts regions larger than ``xi_max`` cells until all fit.

    Each cut is the shortest axis-aligned straight cut that separates a piece of at most ``xi_max`` cells from
    the rest. When no straight cut does, the piece is the first ``xi_max`` cells in row-major order. Both sides
    are split into their connected components; components of ``xi_min`` cells or fewer are discarded and the
    others are cut again if needed.

    Args:
        regions (list[CoverRegion]): Regions to split.
        xi_max (int): Maximum region area in cells.
        xi_min (int): Components this small or smaller are dropped after a cut. Defaults to 0.

    Returns:
        list[CoverRegion]: Regions of at most ``xi_max`` cells, renumbered.

    Raises:
        ValueError: If ``xi_max < 1``.
    """
    if xi_max < 1:
        raise ValueError(f"Maximum region area must be at least one cell, got {xi_max}!")
    pending = [region.cells for region in regions]
    done: list[np.ndarray] = []
    n_cuts = 0
    while pending:
        cells = pending.pop(0)
        if len(cells) <= xi_max:
            done.append(cells)
            continue
        n_cuts += 1
        for part in _cut(cells, xi_max):
            for component in _components(part):
                if len(component) > xi_min:
                    pending.append(component)
    logger.debug(f"Split {len(regions)} regions into {len(done)} with {n_cuts} cuts")
    return _renumber(done)


def place_nodes(regions: list[CoverRegion], obstacles: np.ndarray | None = None) -> list[tuple[int, int]]:
    """One node cell per region: the region cell closest to the region's centroid.

    Ties are broken by the smallest ``(row, col)``.

    Args:
        regions (list[CoverRegion]): Regions.
        obstacles (np.ndarray | None): Cells nodes must avoid. Defaults to None.

    Returns:
        list[tuple[int, int]]: Node cell of each region, in region order.

    Raises:
        ValueError: If a region has no obstacle-free cell.
    """
    nodes = []
    for region in regions:
        cells = region.cells
        if obstacles is not None:
            cells = cells[~np.asarray(obstacles, dtype=bool)[cells[:, 0], cells[:, 1]]]
        if len(cells) == 0:
            raise ValueError(f"Region {region.id} has no obstacle-free cell for its node!")
        distance = np.round(np.sum((cells - region.centroid) ** 2, axis=1), 9)
        row, col = cells[int(np.argmin(distance))]
        nodes.append((int(row), int(col)))
    return nodes
