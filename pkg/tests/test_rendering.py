# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

from unittest import mock

import numpy as np
import pytest
import xarray as xr
from matplotlib.figure import Figure

from dtg.planning.allocation import RobotRoutes
from dtg.planning.graph import TopoGraph
from dtg.planning.instances import illustrative_instance
from dtg.planning.rasters import ElevationGrid, VisibilityMap
from dtg.planning.rendering import (
    graph_dot,
    graph_svg,
    location_point,
    map_svg,
    plan_dot,
    plan_svg,
    plot_plan,
    plot_terrain,
)


@pytest.fixture(scope="module")
def graph():
    """Fixture with the illustrative graph."""
    return illustrative_instance()[0]


@pytest.fixture(scope="module")
def routes():
    """Fixture with two robots crossing edge 1-2 together while a third one waits."""
    return RobotRoutes(
        robots=("b", "a", "c"),
        routes=(((1, 1), (1, 2), (2, 2)), ((1, 1), (1, 2), (2, 2)), ((1, 1), (1, 1), (1, 1))),
    )


def test_graph_svg(graph):
    """Test the content of a graph SVG and that it is reproducible."""
    svg = graph_svg(graph)
    assert svg.startswith('<?xml version="1.0" encoding="UTF-8"?>\n<svg ')
    assert svg.endswith("</svg>\n")
    assert svg.count("<circle") == 5
    assert svg.count('<polyline id="edge-') == 12
    assert svg.count("<line ") == 4
    assert '<circle cx="40.00" cy="429.09" r="8" fill="#333333"/>' in svg
    assert graph_svg(graph) == svg


def test_graph_svg_empty():
    """Test that an empty graph still renders a valid document."""
    svg = graph_svg(TopoGraph(nodes={}, edges=()))
    assert svg.count("<svg") == 1
    assert "<circle" not in svg
    assert svg.endswith("</svg>\n")


def test_location_point(graph):
    """Test that nodes are drawn at the node and edges at their middle."""
    np.testing.assert_allclose(location_point(graph, (2, 2)), [40.0, 80.0])
    np.testing.assert_allclose(location_point(graph, (1, 2)), [20.0, 60.0])


def test_plan_svg(graph, routes):
    """Test one route group per distinct route, with time-step markers."""
    svg = plan_svg(graph, routes)
    assert svg.count('<g class="route"') == 2
    assert "<title>a, b</title>" in svg
    assert "<title>c</title>" in svg
    for t in range(3):
        assert svg.count(f">t{t}</text>") == 2
    assert plan_svg(graph, routes) == svg


def test_map_svg():
    """Test one grey cell per grid cell, scaled from black to white."""
    raster = ElevationGrid(data=np.arange(6.0).reshape(2, 3))
    svg = map_svg(raster)
    assert svg.count("<rect") == 7
    assert 'fill="rgb(0,0,0)"' in svg
    assert 'fill="rgb(255,255,255)"' in svg
    assert 'width="240.00" height="240.00"' in svg


def test_graph_dot(graph):
    """Test pinned node positions, edges and dashed overwatch links."""
    dot = graph_dot(graph)
    assert dot.startswith("digraph dtg {\n")
    assert '  1 [pos="0.00,40.00!"];' in dot
    assert "  1 -> 2;\n" in dot
    assert "  2 -> 1;\n" in dot
    assert dot.count("style=dashed") == 4
    assert '  2 -> 2 [style=dashed, color=orange, label="watch 2-4"];' in dot
    assert dot.endswith("}\n")


def test_plan_dot(graph, routes):
    """Test that only used edges are drawn, labelled with time steps and robots."""
    dot = plan_dot(graph, routes)
    assert '  1 -> 2 [label="t1: a b"];' in dot
    assert dot.count("->") == 1


@mock.patch("matplotlib.pyplot.show", autospec=True)
def test_plot_terrain(mock_plt, graph):
    """Test plotting terrain layers. Currently only checks that the function runs without errors."""
    dem = ElevationGrid(data=np.arange(12.0).reshape(3, 4), resolution=40.0)
    vis = VisibilityMap(data=np.full((3, 4), 0.5), resolution=40.0)
    terrain = xr.Dataset({"elevation": dem.as_dataarray(), "visibility": vis.as_dataarray()})
    fig = plot_terrain(terrain, graph)
    assert isinstance(fig, Figure)
    assert len(fig.axes) >= 2
    mock_plt.assert_called_once()


@mock.patch("matplotlib.pyplot.show", autospec=True)
def test_plot_plan(mock_plt, graph, routes):
    """Test plotting a plan. Currently only checks that the function runs without errors."""
    fig = plot_plan(graph, routes)
    assert isinstance(fig, Figure)
    mock_plt.assert_called_once()

    plot_plan(graph, routes, show=False)
    mock_plt.assert_called_once()
