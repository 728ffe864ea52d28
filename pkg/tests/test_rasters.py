# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import json

import numpy as np
import pytest

from dtg.planning.rasters import (
    CostMap,
    ElevationGrid,
    ObstacleMask,
    VisibilityMap,
    read_ascii_grid,
    read_raster,
    synthetic_meadow,
    write_ascii_grid,
    write_raw_grid,
)


@pytest.fixture()
def ramp():
    """Fixture with a 3 x 4 grid rising to the north-east, 2 m cells, origin at (100, 50)."""
    data = np.arange(12, dtype=float).reshape(3, 4)
    return ElevationGrid(data=data, resolution=2.0, origin=(100.0, 50.0))


def test_raster_geometry(ramp):
    """Test extents and the conversions between cells and world points."""
    assert ramp.shape == (3, 4)
    assert ramp.extent == (100.0, 108.0, 50.0, 56.0)
    assert ramp.cell_of((101.0, 51.0)) == (0, 0)
    assert ramp.cell_of((107.9, 55.9)) == (2, 3)
    assert ramp.cell_of((108.0, 56.0)) == (2, 3)
    np.testing.assert_allclose(ramp.cell_centers([[2, 3]]), [[107.0, 55.0]])
    np.testing.assert_allclose(ramp.fractional_cell([101.0, 51.0]), [[0.0, 0.0]])
    assert repr(ramp) == "ElevationGrid(shape=(3, 4), resolution=2.0, origin=(100.0, 50.0))"

    with pytest.raises(ValueError, match="outside the grid extent"):
        ramp.cell_of((99.0, 51.0))


def test_raster_checks():
    """Test that each grid kind refuses values outside its range."""
    with pytest.raises(ValueError, match="must be 2-D"):
        ElevationGrid(data=np.zeros(3))
    with pytest.raises(ValueError, match="resolution must be positive"):
        ElevationGrid(data=np.zeros((2, 2)), resolution=0.0)
    with pytest.raises(ValueError, match="non-finite"):
        ElevationGrid(data=np.array([[0.0, np.nan]]))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        VisibilityMap(data=np.array([[0.5, 1.5]]))
    with pytest.raises(ValueError, match=r"\[0, 255\]"):
        CostMap(data=np.array([[256.0]]))
    assert ObstacleMask(data=np.array([[0, 2]])).data.dtype == bool


def test_as_dataarray(ramp):
    """Test the quantified DataArray view."""
    da = ramp.as_dataarray()
    assert da.dims == ("y", "x")
    assert str(da.pint.units) == "meter"
    np.testing.assert_allclose(da["x"].values, [101.0, 103.0, 105.0, 107.0])
    assert da.attrs["long_name"] == "elevation"


def test_ascii_grid(tmp_path, ramp):
    """Test that ASCII grids are written north-up and read back in place."""
    path = tmp_path / "ramp.asc"
    write_ascii_grid(ramp, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "ncols 4"
    assert lines[5] == "8 9 10 11"

    grid = read_raster(path)
    np.testing.assert_array_equal(grid.data, ramp.data)
    assert grid.origin == (100.0, 50.0)
    assert grid.resolution == 2.0


def test_ascii_grid_errors(tmp_path):
    """Test that incomplete or inconsistent ASCII grids are refused."""
    with pytest.raises(FileNotFoundError, match="not found"):
        read_ascii_grid(tmp_path / "missing.asc")

    path = tmp_path / "short.asc"
    path.write_text("ncols 2\nnrows 2\ncellsize 1\n1 2 3\n")
    with pytest.raises(ValueError, match="has 3 values, expected 2 x 2"):
        read_ascii_grid(path)

    path.write_text("ncols 2\nnrows 1\n1 2\n")
    with pytest.raises(ValueError, match="missing header fields"):
        read_ascii_grid(path)

    path.write_text("ncols 2\nnrows 1\ncellsize 1\nNODATA_value -9999\n0.5 -9999\n")
    with pytest.raises(ValueError, match="non-finite"):
        read_ascii_grid(path)


def test_raw_grid(tmp_path, ramp):
    """Test the float32 format and its sidecar."""
    path = tmp_path / "ramp.f32"
    write_raw_grid(ramp, path)
    meta = json.loads((tmp_path / "ramp.json").read_text())
    assert meta["nrows"] == 3
    assert meta["units"] == "m"
    assert path.stat().st_size == 12 * 4

    grid = read_raster(path)
    np.testing.assert_array_equal(grid.data, ramp.data)
    assert grid.origin == ramp.origin

    (tmp_path / "ramp.json").unlink()
    with pytest.raises(FileNotFoundError, match="ramp.json not found"):
        read_raster(path)


def test_synthetic_meadow():
    """Test that the synthetic meadow is deterministic and that trees raise the terrain."""
    dem, trees = synthetic_meadow(nrows=30, ncols=40, seed=4, n_clumps=5)
    again, _ = synthetic_meadow(nrows=30, ncols=40, seed=4, n_clumps=5)
    assert dem.shape == trees.shape == (30, 40)
    np.testing.assert_array_equal(dem.data, again.data)
    assert trees.data.any()
    assert dem.data[trees.data].min() >= 8.0
