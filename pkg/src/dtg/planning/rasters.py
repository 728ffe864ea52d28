# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Co-registered terrain grids and their file formats.

Grids are stored with row 0 as the southern-most row, so cell ``(row, col)`` has its centre at
``origin + ((col + 0.5) * resolution, (row + 0.5) * resolution)``. Files are written north-up, as GIS tools
expect, and flipped on read.

Supported formats
-----------------
ESRI ASCII grid (``.asc``)
    ``ncols``, ``nrows``, ``xllcorner``, ``yllcorner``, ``cellsize`` and optional ``NODATA_value`` header lines,
    followed by the rows from north to south.
Raw float32 (``.f32``) with a JSON sidecar (``.json``)
    Little-endian float32 values, north row first, and a sidecar holding ``nrows``, ``ncols``, ``cellsize``,
    ``xllcorner``, ``yllcorner``, ``dtype`` and ``units``.
"""

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import ClassVar, TypeVar

import numpy as np
import pint_xarray  # noqa: F401
import xarray as xr

logger = logging.getLogger(__name__)

R = TypeVar("R", bound="Raster")


@dataclass(frozen=True, eq=False)
class Raster:
    """A regular grid of values.

    Args:
        data (np.ndarray): Values, shape ``(nrows, ncols)``, row 0 south.
        resolution (float): Cell size in metres.
        origin (tuple[float, float]): World coordinates of the south-west corner of the grid.

    Raises:
        ValueError: If the data is not 2-D or the resolution is not positive.
    """

    data: np.ndarray
    resolution: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    units: ClassVar[str] = "dimensionless"
    long_name: ClassVar[str] = "raster"

    def __post_init__(self):
        if np.ndim(self.data) != 2:
            raise ValueError(f"{type(self).__name__} data must be 2-D, got shape {np.shape(self.data)}!")
        if not self.resolution > 0:
            raise ValueError(f"{type(self).__name__} resolution must be positive, got {self.resolution}!")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """``(xmin, xmax, ymin, ymax)`` in world coordinates."""
        x0, y0 = self.origin
        return x0, x0 + self.shape[1] * self.resolution, y0, y0 + self.shape[0] * self.resolution

    def contains(self, point) -> bool:
        xmin, xmax, ymin, ymax = self.extent
        return xmin <= point[0] <= xmax and ymin <= point[1] <= ymax

    def fractional_cell(self, points: np.ndarray) -> np.ndarray:
        """Continuous ``(row, col)`` coordinates of world points, with cell centres at integers."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        col = (points[:, 0] - self.origin[0]) / self.resolution - 0.5
        row = (points[:, 1] - self.origin[1]) / self.resolution - 0.5
        return np.column_stack([row, col])

    def cell_of(self, point) -> tuple[int, int]:
        """Cell containing a world point.

        Raises:
            ValueError: If the point lies outside the grid.
        """
        if not self.contains(point):
            raise ValueError(f"Point {tuple(point)} lies outside the grid extent {self.extent}!")
        row, col = np.floor(self.fractional_cell(point)[0] + 0.5).astype(int)
        return min(int(row), self.shape[0] - 1), min(int(col), self.shape[1] - 1)

    def cell_centers(self, cells: np.ndarray) -> np.ndarray:
        """World coordinates of the centres of ``(row, col)`` cells, as an ``(n, 2)`` array of ``(x, y)``."""
        cells = np.atleast_2d(np.asarray(cells, dtype=float))
        x = self.origin[0] + (cells[:, 1] + 0.5) * self.resolution
        y = self.origin[1] + (cells[:, 0] + 0.5) * self.resolution
        return np.column_stack([x, y])

    def with_data(self: R, data: np.ndarray) -> R:
        """The same grid geometry holding other values."""
        return replace(self, data=data)

    def as_dataarray(self) -> xr.DataArray:
        """The grid as a pint-quantified DataArray with ``y`` and ``x`` cell-centre coordinates."""
        x = self.origin[0] + (np.arange(self.shape[1]) + 0.5) * self.resolution
        y = self.origin[1] + (np.arange(self.shape[0]) + 0.5) * self.resolution
        da = xr.DataArray(
            np.asarray(self.data, dtype=float),
            dims=["y", "x"],
            coords={"y": y, "x": x},
            attrs={"long_name": self.long_name},
        )
        return da.pint.quantify(self.units)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(shape={self.shape}, resolution={self.resolution}, origin={self.origin})"


@dataclass(frozen=True, eq=False, repr=False)
class ElevationGrid(Raster):
    """Digital elevation model, heights in metres."""

    units: ClassVar[str] = "m"
    long_name: ClassVar[str] = "elevation"

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.data)):
            raise ValueError("Elevation grid contains non-finite heights!")


@dataclass(frozen=True, eq=False, repr=False)
class VisibilityMap(Raster):
    """Probability of detection per cell, in [0, 1]."""

    long_name: ClassVar[str] = "visibility"

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.data < 0.0) or np.any(self.data > 1.0):
            raise ValueError("Visibility values must lie in [0, 1]!")


@dataclass(frozen=True, eq=False, repr=False)
class ObstacleMask(Raster):
    """Untraversable cells."""

    long_name: ClassVar[str] = "obstacles"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "data", np.asarray(self.data) != 0)


@dataclass(frozen=True, eq=False, repr=False)
class CostMap(Raster):
    """Local traversal cost per cell, 0 (free) to 255."""

    long_name: ClassVar[str] = "cost"

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.data < 0.0) or np.any(self.data > 255.0):
            raise ValueError("Cost map values must lie in [0, 255]!")


def read_ascii_grid(path: Path, kind: type[R] = ElevationGrid) -> R:
    """Reads an ESRI ASCII grid.

    Args:
        path (Path): File to read.
        kind (type[Raster]): Raster class to build. Defaults to ElevationGrid.

    Returns:
        Raster: The grid.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the header is incomplete or the data does not match it.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Grid file {path} not found!")
    header: dict[str, float] = {}
    with path.open() as f:
        lines = f.read().splitlines()
    n_header = 0
    for line in lines:
        fields = line.split()
        if len(fields) != 2 or not fields[0][0].isalpha():
            break
        header[fields[0].lower()] = float(fields[1])
        n_header += 1

    missing = {"ncols", "nrows", "cellsize"} - header.keys()
    if missing:
        raise ValueError(f"ASCII grid {path} is missing header fields {sorted(missing)}!")
    nrows, ncols, cellsize = int(header["nrows"]), int(header["ncols"]), header["cellsize"]
    x0 = header.get("xllcorner", header.get("xllcenter", 0.5 * cellsize) - 0.5 * cellsize)
    y0 = header.get("yllcorner", header.get("yllcenter", 0.5 * cellsize) - 0.5 * cellsize)

    values = np.array([float(v) for line in lines[n_header:] for v in line.split()])
    if values.size != nrows * ncols:
        raise ValueError(f"ASCII grid {path} has {values.size} values, expected {nrows} x {ncols}!")
    data = np.flipud(values.reshape(nrows, ncols))
    if "nodata_value" in header:
        data = np.where(data == header["nodata_value"], np.nan, data)
    logger.debug(f"Read {nrows} x {ncols} ASCII grid from {path}")
    return kind(data=data, resolution=cellsize, origin=(x0, y0))


def write_ascii_grid(raster: Raster, path: Path):
    """Writes a grid in ESRI ASCII format, north row first."""
    path = Path(path)
    nrows, ncols = raster.shape
    lines = [
        f"ncols {ncols}",
        f"nrows {nrows}",
        f"xllcorner {raster.origin[0]!r}",
        f"yllcorner {raster.origin[1]!r}",
        f"cellsize {float(raster.resolution)!r}",
    ]
    data = np.flipud(np.asarray(raster.data, dtype=float))
    lines.extend(" ".join(f"{v:.10g}" for v in row) for row in data)
    path.write_text("\n".join(lines) + "\n")


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_raw_grid(raster: Raster, path: Path):
    """Writes a grid as little-endian float32 values with a JSON sidecar next to it."""
    path = Path(path)
    np.flipud(np.asarray(raster.data, dtype="<f4")).tofile(path)
    meta = {
        "nrows": raster.shape[0],
        "ncols": raster.shape[1],
        "cellsize": float(raster.resolution),
        "xllcorner": float(raster.origin[0]),
        "yllcorner": float(raster.origin[1]),
        "dtype": "float32",
        "units": raster.units,
    }
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_raw_grid(path: Path, kind: type[R] = ElevationGrid) -> R:
    """Reads a float32 grid written by ``write_raw_grid``.

    Raises:
        FileNotFoundError: If the grid or its sidecar does not exist.
        ValueError: If the file size does not match the sidecar.
    """
    path = Path(path)
    sidecar = _sidecar(path)
    for required in (path, sidecar):
        if not required.is_file():
            raise FileNotFoundError(f"Grid file {required} not found!")
    meta = json.loads(sidecar.read_text())
    values = np.fromfile(path, dtype="<f4")
    nrows, ncols = int(meta["nrows"]), int(meta["ncols"])
    if values.size != nrows * ncols:
        raise ValueError(f"Raw grid {path} has {values.size} values, expected {nrows} x {ncols}!")
    data = np.flipud(values.reshape(nrows, ncols)).astype(float)
    origin = (float(meta["xllcorner"]), float(meta["yllcorner"]))
    return kind(data=data, resolution=float(meta["cellsize"]), origin=origin)


def read_raster(path: Path, kind: type[R] = ElevationGrid) -> R:
    """Reads a grid, choosing the format from the file suffix (``.asc`` for ASCII, anything else raw)."""
    path = Path(path)
    if path.suffix.lower() == ".asc":
        return read_ascii_grid(path, kind)
    return read_raw_grid(path, kind)


def synthetic_meadow(
    nrows: int = 60,
    ncols: int = 80,
    resolution: float = 1.0,
    seed: int = 0,
    n_hills: int = 3,
    n_clumps: int = 10,
    tree_height: float = 8.0,
) -> tuple[ElevationGrid, ObstacleMask]:
    """Open meadow with gentle hills and clumps of trees.

    Tree clumps are discs of 2 to 4 cells radius. They are obstacles, and their canopy is added to the elevation so
    they also block sight lines.

    Args:
        nrows (int): Grid rows. Defaults to 60.
        ncols (int): Grid columns. Defaults to 80.
        resolution (float): Cell size in metres. Defaults to 1.
        seed (int): Random seed. Defaults to 0.
        n_hills (int): Number of Gaussian hills. Defaults to 3.
        n_clumps (int): Number of tree clumps. Defaults to 10.
        tree_height (float): Canopy height in metres. Defaults to 8.

    Returns:
        tuple[ElevationGrid, ObstacleMask]: Elevation including the canopy, and the tree cells.
    """
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:nrows, 0:ncols]
    ground = np.zeros((nrows, ncols))
    for _ in range(n_hills):
        r0, c0 = rng.uniform(0, nrows), rng.uniform(0, ncols)
        height = rng.uniform(1.0, 4.0)
        width = rng.uniform(0.1, 0.25) * min(nrows, ncols)
        ground += height * np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / (2 * width**2))

    trees = np.zeros((nrows, ncols), dtype=bool)
    for _ in range(n_clumps):
        r0, c0 = rng.integers(0, nrows), rng.integers(0, ncols)
        radius = rng.uniform(2.0, 4.0)
        trees |= (rows - r0) ** 2 + (cols - c0) ** 2 <= radius**2

    elevation = ground + np.where(trees, tree_height, 0.0)
    logger.info(f"Generated {nrows} x {ncols} synthetic meadow with {int(trees.sum())} tree cells")
    return (
        ElevationGrid(data=elevation, resolution=resolution),
        ObstacleMask(data=trees, resolution=resolution),
    )
