# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Renders of graphs, plans and maps.

SVG and DOT renders are plain text built from sorted inputs with fixed number formatting, so the same input always
gives the same bytes. Plan renders draw one line per distinct robot route, with square markers labelled ``t0``,
``t1``, ... at the location of the route at each time step. Matplotlib figures are provided for interactive use.
"""

import logging
from xml.sax.saxutils import escape

import matplotlib.pyplot as plt
import numpy as np
import xarray as xr
from matplotlib.figure import Figure

from dtg.planning.allocation import RobotRoutes
from dtg.planning.graph import Edge, TopoGraph, is_self_loop
from dtg.planning.rasters import Raster

logger = logging.getLogger(__name__)

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _fmt(value: float) -> str:
    return f"{value:.2f}"


class _Canvas:
    """Maps world coordinates onto an SVG canvas with y pointing down."""

    def __init__(self, points: np.ndarray, width: int, height: int, margin: int) -> None:
        self.width, self.height, self.margin = width, height, margin
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(points) == 0:
            self.lo, self.scale = np.zeros(2), 1.0
            return
        self.lo = points.min(axis=0)
        span = np.maximum(points.max(axis=0) - self.lo, 1e-9)
        self.scale = float(min((width - 2 * margin) / span[0], (height - 2 * margin) / span[1]))

    def xy(self, point) -> tuple[str, str]:
        x = self.margin + (point[0] - self.lo[0]) * self.scale
        y = self.height - self.margin - (point[1] - self.lo[1]) * self.scale
        return _fmt(x), _fmt(y)

    def polyline(self, points: np.ndarray) -> str:
        return " ".join(",".join(self.xy(p)) for p in points)


def _svg(width: int, height: int, body: list[str]) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    return "\n".join([*head, *body, "</svg>"]) + "\n"


def _graph_points(graph: TopoGraph) -> np.ndarray:
    points = [graph.node_point(v) for v in graph.node_ids]
    points += [graph.edge_polyline(e) for e in graph.traversal_edges]
    return np.vstack(points) if points else np.zeros((0, 2))


def _graph_body(graph: TopoGraph, canvas: _Canvas) -> list[str]:
    body = ['<g id="edges" stroke="#999999" stroke-width="1.5" fill="none">']
    for e in graph.traversal_edges:
        body.append(f'<polyline id="edge-{e[0]}-{e[1]}" points="{canvas.polyline(graph.edge_polyline(e))}"/>')
    body.append("</g>")
    body.append('<g id="overwatch" stroke="#ff7f0e" stroke-width="1" stroke-dasharray="4,3" fill="none">')
    for o in graph.overwatch:
        x1, y1 = canvas.xy(graph.node_point(o.watcher))
        x2, y2 = canvas.xy(graph.edge_polyline(o.edge).mean(axis=0))
        body.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>')
    body.append("</g>")
    body.append('<g id="nodes" font-family="sans-serif" font-size="12">')
    for v in graph.node_ids:
        x, y = canvas.xy(graph.node_point(v))
        body.append(f'<circle cx="{x}" cy="{y}" r="8" fill="#333333"/>')
        body.append(f'<text x="{x}" y="{y}" dy="-12" text-anchor="middle">{v}</text>')
    body.append("</g>")
    return body


def graph_svg(graph: TopoGraph, width: int = 800, height: int = 600, margin: int = 40) -> str:
    """SVG of a graph: edge polylines, dashed overwatch links from watcher to watched edge, and labelled nodes."""
    canvas = _Canvas(_graph_points(graph), width, height, margin)
    return _svg(width, height, _graph_body(graph, canvas))


def location_point(graph: TopoGraph, loc: Edge) -> np.ndarray:
    """Where a location is drawn: the node itself, or the middle vertex of the edge polyline."""
    if is_self_loop(loc):
        return graph.node_point(loc[0])
    polyline = graph.edge_polyline(loc)
    return polyline[len(polyline) // 2] if len(polyline) > 2 else polyline.mean(axis=0)


def _distinct_routes(routes: RobotRoutes) -> list[tuple[tuple[Edge, ...], tuple[str, ...]]]:
    groups: dict[tuple[Edge, ...], list[str]] = {}
    for robot, route in zip(routes.robots, routes.routes, strict=True):
        groups.setdefault(route, []).append(robot)
    return sorted(((route, tuple(sorted(names))) for route, names in groups.items()), key=lambda item: item[1])


def plan_svg(graph: TopoGraph, routes: RobotRoutes, width: int = 800, height: int = 600, margin: int = 40) -> str:
    """SVG of a plan over its graph, one coloured line per distinct route with time-step markers."""
    canvas = _Canvas(_graph_points(graph), width, height, margin)
    body = _graph_body(graph, canvas)
    body.append('<g id="routes" font-family="sans-serif" font-size="10">')
    for i, (route, names) in enumerate(_distinct_routes(routes)):
        color = PALETTE[i % len(PALETTE)]
        points = np.array([location_point(graph, loc) for loc in route])
        label = escape(", ".join(names))
        body.append(f'<g class="route" stroke="{color}" fill="{color}"><title>{label}</title>')
        body.append(f'<polyline points="{canvas.polyline(points)}" fill="none" stroke-width="2"/>')
        for t, point in enumerate(points):
            x, y = canvas.xy(point)
            body.append(f'<rect x="{x}" y="{y}" width="6" height="6" transform="translate(-3,-3)"/>')
            body.append(f'<text x="{x}" y="{y}" dx="5" dy="{_fmt(4 + 10 * i)}" stroke="none">t{t}</text>')
        body.append("</g>")
    body.append("</g>")
    return _svg(width, height, body)


def map_svg(raster: Raster, width: int = 800, height: int = 600, margin: int = 40) -> str:
    """SVG of a raster, one grey cell per grid cell from black (lowest value) to white (highest)."""
    data = np.asarray(raster.data, dtype=float)
    xmin, xmax, ymin, ymax = raster.extent
    canvas = _Canvas(np.array([[xmin, ymin], [xmax, ymax]]), width, height, margin)
    finite = data[np.isfinite(data)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    size = _fmt(raster.resolution * canvas.scale)
    body = ['<g id="cells" stroke="none">']
    for row in range(data.shape[0]):
        for col in range(data.shape[1]):
            value = data[row, col]
            level = 0 if not np.isfinite(value) else int(round(255 * (value - lo) / span))
            corner = raster.cell_centers([[row, col]])[0] + np.array([-0.5, 0.5]) * raster.resolution
            x, y = canvas.xy(corner)
            body.append(f'<rect x="{x}" y="{y}" width="{size}" height="{size}" fill="rgb({level},{level},{level})"/>')
    body.append("</g>")
    return _svg(width, height, body)


def graph_dot(graph: TopoGraph, name: str = "dtg") -> str:
    """Graphviz DOT of a graph with fixed node positions; overwatch links are dashed."""
    lines = [f"digraph {name} {{", "  node [shape=circle];"]
    for v in graph.node_ids:
        x, y = graph.node_point(v)
        lines.append(f'  {v} [pos="{_fmt(x)},{_fmt(y)}!"];')
    for j, k in graph.traversal_edges:
        lines.append(f"  {j} -> {k};")
    for o in graph.overwatch:
        lines.append(
            f'  {o.watcher} -> {o.edge[0]} [style=dashed, color=orange, label="watch {o.edge[0]}-{o.edge[1]}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def plan_dot(graph: TopoGraph, routes: RobotRoutes, name: str = "plan") -> str:
    """Graphviz DOT of a plan: used edges labelled with the time steps and robots traversing them."""
    lines = [f"digraph {name} {{", "  node [shape=circle];"]
    for v in graph.node_ids:
        x, y = graph.node_point(v)
        lines.append(f'  {v} [pos="{_fmt(x)},{_fmt(y)}!"];')
    used: dict[Edge, list[str]] = {}
    for t in range(1, routes.horizon + 1):
        for edge, members in routes.coalitions(t).items():
            used.setdefault(edge, []).append(f"t{t - 1}: {' '.join(members)}")
    for (j, k), labels in sorted(used.items()):
        lines.append(f'  {j} -> {k} [label="{"; ".join(labels)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def plot_terrain(terrain: xr.Dataset, graph: TopoGraph | None = None, show: bool = True) -> Figure:
    """Plots the elevation, visibility and cover layers of a terrain stack, with the graph on top.

    Args:
        terrain (xr.Dataset): Terrain stack as returned by graph generation.
        graph (TopoGraph | None): Graph to overlay. Defaults to None.
        show (bool): Whether to show the generated plot. Default: True.

    Returns:
        Figure: The Matplotlib figure.
    """
    layers = [name for name in ("elevation", "visibility", "cover") if name in terrain]
    fig, axes = plt.subplots(1, len(layers), figsize=(6 * len(layers), 5), squeeze=False)
    for ax, name in zip(axes[0], layers, strict=True):
        terrain[name].pint.dequantify().plot(ax=ax, x="x", y="y")
        ax.set_aspect("equal")
        ax.set_title(name)
        if graph is not None:
            for e in graph.traversal_edges:
                line = graph.edge_polyline(e)
                ax.plot(line[:, 0], line[:, 1], color="white", linewidth=0.8)
            points = np.array([graph.node_point(v) for v in graph.node_ids]).reshape(-1, 2)
            ax.scatter(points[:, 0], points[:, 1], color="red", s=12)

    if show:
        plt.show()

    return fig


def plot_plan(graph: TopoGraph, routes: RobotRoutes, show: bool = True) -> Figure:
    """Plots each distinct route over the graph with its time-step markers."""
    fig, ax = plt.subplots(figsize=(8, 6))
    for e in graph.traversal_edges:
        line = graph.edge_polyline(e)
        ax.plot(line[:, 0], line[:, 1], color="0.7", linewidth=1)
    for v in graph.node_ids:
        x, y = graph.node_point(v)
        ax.annotate(str(v), (x, y), textcoords="offset points", xytext=(0, 8), ha="center")
    for i, (route, names) in enumerate(_distinct_routes(routes)):
        points = np.array([location_point(graph, loc) for loc in route])
        ax.plot(points[:, 0], points[:, 1], marker="s", color=PALETTE[i % len(PALETTE)], label=", ".join(names))
        for t, (x, y) in enumerate(points):
            ax.annotate(f"t{t}", (x, y), textcoords="offset points", xytext=(5, -10 * i), fontsize=7)
    ax.set_aspect("equal")
    ax.legend()
    ax.set_title("Plan")

    if show:
        plt.show()

    return fig
