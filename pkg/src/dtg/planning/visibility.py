# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Probabilistic visibility of terrain from uncertain observers.

A viewshed marks the cells an observer can see. The visibility map averages the viewsheds of observers sampled
from an ``ObserverDistribution`` and fades the result with distance from the distribution's boundary, reaching
zero at ``d_max``.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Sequence

import numpy as np
from scipy import ndimage

from dtg.planning.rasters import ElevationGrid, ObstacleMask, Raster, VisibilityMap

logger = logging.getLogger(__name__)

# Height above terrain of an observer's eyes, in metres
DEFAULT_EYE_HEIGHT = 1.5


class ObserverDistribution(ABC):
    """Where an observer may be.

    Args:
        eye_height (float): Height of the observer's eyes above the terrain, in metres.
    """

    def __init__(self, eye_height: float = DEFAULT_EYE_HEIGHT) -> None:
        self.eye_height = eye_height

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draws ``n`` observer positions as an ``(n, 2)`` array of world ``(x, y)`` points."""

    @abstractmethod
    def boundary_mask(self, grid: Raster) -> np.ndarray:
        """Cells on or inside the distribution's boundary, from which visibility starts to fade."""


class GaussianMixtureObserver(ObserverDistribution):
    """Observer position drawn from a mixture of 2-D Gaussians.

    The boundary is the union of the 2-sigma ellipses of the components. A component with an all-zero covariance
    is a point mass whose boundary is the cell containing its mean.

    Args:
        means (Sequence): Component means, ``(k, 2)`` world coordinates.
        covariances (Sequence): Component covariances, ``(k, 2, 2)`` in square metres.
        weights (Sequence | None): Mixture weights. Defaults to None (equal weights).
        eye_height (float): Eye height in metres.

    Raises:
        ValueError: If shapes are inconsistent, a weight is negative, or a nonzero covariance is not positive
            definite.
    """

    def __init__(
        self,
        means: Sequence,
        covariances: Sequence,
        weights: Sequence | None = None,
        eye_height: float = DEFAULT_EYE_HEIGHT,
    ) -> None:
        super().__init__(eye_height)
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.covariances = np.asarray(covariances, dtype=float).reshape(-1, 2, 2)
        k = self.means.shape[0]
        if self.means.shape != (k, 2) or self.covariances.shape[0] != k:
            raise ValueError(f"Expected {k} means of shape (2,) and covariances of shape (2, 2)!")
        weights = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
        if weights.shape != (k,) or np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError(f"Mixture weights must be {k} nonnegative numbers with a positive sum!")
        self.weights = weights / weights.sum()

        self.point_mass = np.array([not np.any(c) for c in self.covariances])
        self._chol = np.zeros_like(self.covariances)
        self._precision = np.zeros_like(self.covariances)
        for i, cov in enumerate(self.covariances):
            if self.point_mass[i]:
                continue
            if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() <= 0:
                raise ValueError(f"Degenerate covariance for observer component {i}: {cov.tolist()}!")
            self._chol[i] = np.linalg.cholesky(cov)
            self._precision[i] = np.linalg.inv(cov)

    @classmethod
    def point(cls, x: float, y: float, eye_height: float = DEFAULT_EYE_HEIGHT) -> "GaussianMixtureObserver":
        """An observer known to stand at ``(x, y)``."""
        return cls([[x, y]], [np.zeros((2, 2))], eye_height=eye_height)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        component = rng.choice(len(self.weights), size=n, p=self.weights)
        noise = rng.standard_normal((n, 2))
        return self.means[component] + np.einsum("nij,nj->ni", self._chol[component], noise)

    def boundary_mask(self, grid: Raster) -> np.ndarray:
        nrows, ncols = grid.shape
        rows, cols = np.mgrid[0:nrows, 0:ncols]
        centers = grid.cell_centers(np.column_stack([rows.ravel(), cols.ravel()]))
        mask = np.zeros(nrows * ncols, dtype=bool)
        for i, mean in enumerate(self.means):
            if self.point_mass[i]:
                if grid.contains(mean):
                    row, col = grid.cell_of(mean)
                    mask[row * ncols + col] = True
                continue
            delta = centers - mean
            mahalanobis = np.einsum("ni,ij,nj->n", delta, self._precision[i], delta)
            mask |= mahalanobis <= 4.0
        return mask.reshape(nrows, ncols)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(components={len(self.weights)}, eye_height={self.eye_height})"


class UniformRegionObserver(ObserverDistribution):
    """Observer standing at the centre of a cell drawn uniformly from a set of cells.

    Args:
        grid (Raster): Grid the cells belong to.
        cells (np.ndarray): ``(k, 2)`` array of ``(row, col)`` cells.
        eye_height (float): Eye height in metres.

    Raises:
        ValueError: If no cells are given.
    """

    def __init__(self, grid: Raster, cells: np.ndarray, eye_height: float = DEFAULT_EYE_HEIGHT) -> None:
        super().__init__(eye_height)
        self.cells = np.atleast_2d(np.asarray(cells, dtype=int))
        if self.cells.size == 0:
            raise ValueError("Uniform observer region must contain at least one cell!")
        self.centers = grid.cell_centers(self.cells)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.centers[rng.integers(0, len(self.centers), size=n)]

    def boundary_mask(self, grid: Raster) -> np.ndarray:
        mask = np.zeros(grid.shape, dtype=bool)
        mask[self.cells[:, 0], self.cells[:, 1]] = True
        return mask

    def __repr__(self) -> str:
        return f"{type(self).__name__}(cells={len(self.cells)}, eye_height={self.eye_height})"


def compute_viewshed(
    dem: ElevationGrid, observer: Sequence[float], eye_height: float = DEFAULT_EYE_HEIGHT, target_height: float = 0.0
) -> np.ndarray:
    """Cells visible from an observer.

    A cell is visible when no terrain between the observer's eyes and the top of the cell rises above the sight
    line. Terrain heights along each sight line are interpolated bilinearly at steps of at most half a cell.

    Args:
        dem (ElevationGrid): Terrain.
        observer (Sequence[float]): World ``(x, y)`` position of the observer.
        eye_height (float): Eye height above the terrain, in metres.
        target_height (float): Height above the terrain of the point looked at in each cell, in metres.

    Returns:
        np.ndarray: Boolean visibility mask shaped like the DEM.

    Raises:
        ValueError: If the observer lies outside the grid.
    """
    if not dem.contains(observer):
        raise ValueError(f"Observer {tuple(observer)} lies outside the grid extent {dem.extent}!")
    heights = np.asarray(dem.data, dtype=float)
    nrows, ncols = heights.shape
    origin = dem.fractional_cell(observer)[0]
    eye = ndimage.map_coordinates(heights, origin.reshape(2, 1), order=1, mode="nearest")[0] + eye_height

    rows, cols = np.mgrid[0:nrows, 0:ncols]
    targets = np.column_stack([rows.ravel(), cols.ravel()]).astype(float)
    top = heights.ravel() + target_height
    distance = np.linalg.norm(targets - origin, axis=1)
    n_steps = max(2, math.ceil(2.0 * distance.max()))

    visible = np.ones(nrows * ncols, dtype=bool)
    for i in range(1, n_steps):
        s = i / n_steps
        points = origin + s * (targets - origin)
        terrain = ndimage.map_coordinates(heights, points.T, order=1, mode="nearest")
        visible &= terrain <= eye + s * (top - eye) + 1e-9

    visible = visible.reshape(nrows, ncols)
    visible[dem.cell_of(observer)] = True
    return visible


def compute_visibility_map(
    dem: ElevationGrid,
    observers: ObserverDistribution,
    n_samples: int,
    d_max: float,
    seed: int | Sequence[int] = 0,
    target_height: float = 0.0,
) -> VisibilityMap:
    """Expected, distance-weighted visibility of every cell.

    Sampled observers are snapped to the centre of their cell and viewsheds are computed once per cell. Samples
    falling outside the grid are clipped to its border. Each cell's mean visibility is multiplied by
    ``max(1 - d / d_max, 0)``, where ``d`` is its distance to the distribution's boundary.

    Args:
        dem (ElevationGrid): Terrain.
        observers (ObserverDistribution): Observer distribution.
        n_samples (int): Number of sampled observers.
        d_max (float): Distance in metres at which visibility drops to zero.
        seed (int | Sequence[int]): Random seed. Defaults to 0.
        target_height (float): Height above terrain of the point looked at in each cell. Defaults to 0.

    Returns:
        VisibilityMap: Probability of detection per cell.

    Raises:
        ValueError: If ``n_samples < 1`` or ``d_max <= 0``.
    """
    if n_samples < 1:
        raise ValueError(f"Need at least one observer sample, got {n_samples}!")
    if not d_max > 0:
        raise ValueError(f"Maximum visibility distance must be positive, got {d_max}!")

    rng = np.random.default_rng(seed)
    points = observers.sample(n_samples, rng)
    xmin, xmax, ymin, ymax = dem.extent
    half = 0.5 * dem.resolution
    clipped = np.column_stack(
        [np.clip(points[:, 0], xmin + half, xmax - half), np.clip(points[:, 1], ymin + half, ymax - half)]
    )
    n_clipped = int(np.any(clipped != points, axis=1).sum())
    if n_clipped:
        logger.warning(f"{n_clipped} of {n_samples} observer samples fell outside the grid and were clipped")

    cache: dict[tuple[int, int], np.ndarray] = {}
    total = np.zeros(dem.shape)
    for point in clipped:
        cell = dem.cell_of(point)
        if cell not in cache:
            cache[cell] = compute_viewshed(dem, dem.cell_centers(cell)[0], observers.eye_height, target_height)
        total += cache[cell]
    logger.debug(f"Computed {len(cache)} distinct viewsheds for {n_samples} observer samples")

    boundary = observers.boundary_mask(dem)
    if boundary.any():
        distance = ndimage.distance_transform_edt(~boundary) * dem.resolution
    else:
        distance = np.full(dem.shape, np.inf)
    weight = np.clip(1.0 - distance / d_max, 0.0, None)
    data = np.clip(total / n_samples * weight, 0.0, 1.0)
    return VisibilityMap(data=data, resolution=dem.resolution, origin=dem.origin)


def get_cover_mask(vis: VisibilityMap, nu: float, obstacles: ObstacleMask | np.ndarray | None = None) -> np.ndarray:
    """Cells with visibility strictly below ``nu`` that are not obstacles."""
    mask = np.asarray(vis.data) < nu
    if obstacles is not None:
        blocked = obstacles.data if isinstance(obstacles, Raster) else np.asarray(obstacles, dtype=bool)
        mask &= ~blocked
    return mask
