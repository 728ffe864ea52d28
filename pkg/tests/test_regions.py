# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

from dtg.planning.regions import CoverRegion, get_cover_regions, place_nodes, region_labels, split_regions


@pytest.fixture()
def mask():
    """Fixture with a 3 x 3 block, a diagonal pair and a single cell on an 8 x 10 grid."""
    mask = np.zeros((8, 10), dtype=bool)
    mask[2:5, 5:8] = True
    mask[0, 0] = mask[1, 1] = True
    mask[7, 9] = True
    return mask


def test_get_cover_regions(mask):
    """Test that small components are dropped, diagonals connect and numbering is row-major."""
    regions = get_cover_regions(mask, xi_min=1)
    assert [r.area for r in regions] == [2, 9]
    assert [r.id for r in regions] == [1, 2]
    np.testing.assert_array_equal(regions[0].cells, [[0, 0], [1, 1]])
    np.testing.assert_allclose(regions[1].centroid, [3.0, 6.0])
    assert repr(regions[1]) == "CoverRegion(id=2, area=9)"

    assert [r.area for r in get_cover_regions(mask, xi_min=2)] == [9]
    assert get_cover_regions(np.zeros((3, 3), dtype=bool), xi_min=0) == []


def test_region_labels(mask):
    """Test the label grid of a set of regions."""
    regions = get_cover_regions(mask, xi_min=0)
    labels = region_labels(regions, mask.shape)
    assert labels[1, 1] == 1
    assert labels[3, 6] == 2
    assert labels[7, 9] == 3
    assert (labels > 0).sum() == mask.sum()


def test_split_regions():
    """Test that a long region is cut along straight lines into pieces that fit."""
    block = CoverRegion(id=1, cells=np.argwhere(np.ones((4, 10), dtype=bool)))
    pieces = split_regions([block], xi_max=12)
    assert [p.area for p in pieces] == [12, 12, 12, 4]
    assert [tuple(p.cells[0]) for p in pieces] == [(0, 0), (0, 3), (0, 6), (3, 6)]

    assert [p.area for p in split_regions([block], xi_max=12, xi_min=4)] == [12, 12, 12]
    assert [p.area for p in split_regions([block], xi_max=40)] == [40]


def test_split_regions_jogged():
    """Test that a region with no fitting straight cut is split in row-major order."""
    block = CoverRegion(id=1, cells=np.argwhere(np.ones((3, 3), dtype=bool)))
    pieces = split_regions([block], xi_max=2)
    assert all(p.area <= 2 for p in pieces)
    assert sum(p.area for p in pieces) == 9


def test_split_regions_error():
    """Test that an empty maximum area is refused."""
    with pytest.raises(ValueError, match="at least one cell"):
        split_regions([], xi_max=0)


def test_place_nodes(mask):
    """Test that nodes go to the cell nearest the centroid, avoiding obstacles."""
    regions = get_cover_regions(mask, xi_min=1)
    assert place_nodes(regions) == [(0, 0), (3, 6)]

    obstacles = np.zeros_like(mask)
    obstacles[3, 6] = True
    assert place_nodes(regions, obstacles) == [(0, 0), (2, 6)]

    with pytest.raises(ValueError, match="Region 1 has no obstacle-free cell"):
        place_nodes(regions, mask)
