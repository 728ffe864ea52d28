# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

from dtg.planning.rasters import ElevationGrid, ObstacleMask, VisibilityMap
from dtg.planning.visibility import (
    GaussianMixtureObserver,
    UniformRegionObserver,
    compute_viewshed,
    compute_visibility_map,
    get_cover_mask,
)


@pytest.fixture()
def flat():
    """Fixture with a flat 20 x 20 grid of 1 m cells."""
    return ElevationGrid(data=np.zeros((20, 20)))


@pytest.fixture()
def wall():
    """Fixture with a flat 20 x 20 grid crossed by a 5 m wall along column 10."""
    data = np.zeros((20, 20))
    data[:, 10] = 5.0
    return ElevationGrid(data=data)


def test_viewshed_flat(flat):
    """Test that everything is visible on flat ground."""
    assert compute_viewshed(flat, (10.5, 10.5)).all()


def test_viewshed_wall(wall):
    """Test that a wall hides the ground behind it but not in front of it."""
    visible = compute_viewshed(wall, (3.5, 10.5))
    assert visible[:, :9].all()
    assert visible[10, 10]
    assert not visible[8:13, 12:].any()


def test_viewshed_outside(flat):
    """Test that observers off the grid are refused."""
    with pytest.raises(ValueError, match="outside the grid extent"):
        compute_viewshed(flat, (-1.0, 3.0))


def test_visibility_distance_weight(flat):
    """Test that visibility fades linearly with distance from a known observer position."""
    vis = compute_visibility_map(flat, GaussianMixtureObserver.point(0.5, 0.5), n_samples=4, d_max=10.0)
    assert isinstance(vis, VisibilityMap)
    assert vis.data[0, 0] == pytest.approx(1.0)
    assert vis.data[0, 5] == pytest.approx(0.5)
    assert vis.data[3, 4] == pytest.approx(0.5)
    assert vis.data[0, 12] == pytest.approx(0.0)
    assert vis.data[19, 19] == pytest.approx(0.0)


def test_visibility_deterministic(wall):
    """Test that the same seed gives the same map and that the wall shadow lowers visibility."""
    observers = GaussianMixtureObserver([[4.0, 10.0]], [np.eye(2) * 4.0])
    first = compute_visibility_map(wall, observers, n_samples=16, d_max=50.0, seed=3)
    second = compute_visibility_map(wall, observers, n_samples=16, d_max=50.0, seed=3)
    np.testing.assert_array_equal(first.data, second.data)
    assert first.data[10, 15] < first.data[10, 5]


def test_visibility_errors(flat):
    """Test the argument checks of the visibility map."""
    observers = GaussianMixtureObserver.point(5.0, 5.0)
    with pytest.raises(ValueError, match="at least one observer sample"):
        compute_visibility_map(flat, observers, n_samples=0, d_max=10.0)
    with pytest.raises(ValueError, match="must be positive"):
        compute_visibility_map(flat, observers, n_samples=4, d_max=0.0)


def test_gaussian_boundary(flat):
    """Test that the boundary of a Gaussian observer is its 2-sigma disc."""
    observers = GaussianMixtureObserver([[10.5, 10.5]], [np.eye(2) * 4.0])
    mask = observers.boundary_mask(flat)
    assert mask.sum() == 49
    assert mask[10, 14]
    assert not mask[10, 15]
    assert repr(observers) == "GaussianMixtureObserver(components=1, eye_height=1.5)"


def test_gaussian_errors():
    """Test that inconsistent mixtures are refused."""
    with pytest.raises(ValueError, match="nonnegative numbers"):
        GaussianMixtureObserver([[0.0, 0.0]], [np.eye(2)], weights=[-1.0])
    with pytest.raises(ValueError, match="Degenerate covariance"):
        GaussianMixtureObserver([[0.0, 0.0]], [[[1.0, 0.0], [0.0, -1.0]]])
    with pytest.raises(ValueError, match="Expected 2 means"):
        GaussianMixtureObserver([[0.0, 0.0], [1.0, 1.0]], [np.eye(2)])


def test_uniform_region_observer(flat):
    """Test that a uniform observer samples cell centres of its region."""
    observers = UniformRegionObserver(flat, [[2, 3], [4, 5]])
    samples = observers.sample(50, np.random.default_rng(0))
    assert {tuple(p) for p in samples} <= {(3.5, 2.5), (5.5, 4.5)}
    assert observers.boundary_mask(flat).sum() == 2

    with pytest.raises(ValueError, match="at least one cell"):
        UniformRegionObserver(flat, np.zeros((0, 2)))


def test_get_cover_mask():
    """Test that cover is low visibility off obstacles."""
    vis = VisibilityMap(data=np.array([[0.1, 0.5, 0.9], [0.2, 0.29, 0.3]]))
    obstacles = ObstacleMask(data=np.array([[0, 0, 0], [1, 0, 0]]))
    np.testing.assert_array_equal(get_cover_mask(vis, 0.3), [[True, False, False], [True, True, False]])
    np.testing.assert_array_equal(get_cover_mask(vis, 0.3, obstacles), [[True, False, False], [False, True, False]])
