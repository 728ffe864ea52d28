# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""End-to-end planning pipeline.

Stages run in order, each persisting its artifacts under the output directory before the next starts:

========  ==========================================================
terrain   elevation and obstacle grids
graphgen  visibility map, cover regions, paths and the planning graph
validate  graph and scenario invariants
model     the count-based MILP, in LP format
solve     the optimal occupancy
allocate  one route per robot
simulate  MPPI execution of the routes
metric    team protection
render    SVG and DOT renders
========  ==========================================================

With ``resume=True`` the graph and solution of a previous run in the same directory are reused instead of being
recomputed. A failing stage raises ``PipelineStageError``; artifacts of earlier stages are kept.
"""

import logging
import tarfile
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from dtg.planning.allocation import RobotRoutes, allocate_routes
from dtg.planning.config import PipelineConfig
from dtg.planning.graph import Scenario, TopoGraph, validate
from dtg.planning.graphgen import generate_graph
from dtg.planning.lp_format import export_lp
from dtg.planning.metrics import protection_log, protection_metric
from dtg.planning.model import OccupancySolution, build_milp
from dtg.planning.rasters import (
    CostMap,
    ElevationGrid,
    ObstacleMask,
    Raster,
    VisibilityMap,
    read_raster,
    synthetic_meadow,
    write_raw_grid,
)
from dtg.planning.rendering import graph_dot, graph_svg, map_svg, plan_dot, plan_svg
from dtg.planning.serialization import (
    generated_to_dict,
    graph_from_dict,
    graph_to_dict,
    read_json,
    routes_to_dict,
    scenario_from_dict,
    scenario_to_dict,
    solution_from_dict,
    solution_to_dict,
    write_json,
)
from dtg.planning.simulation import simulate_team
from dtg.planning.solver import solve_milp

logger = logging.getLogger(__name__)

STAGES = ("terrain", "graphgen", "validate", "model", "solve", "allocate", "simulate", "metric", "render")
OBSTACLE_COST = 254.0


class StageStatus(Enum):
    """Status of a pipeline stage."""

    PENDING = 1  # Stage has not run
    DONE = 2  # Stage finished and persisted its artifacts
    CACHED = 3  # Artifacts were reused from a previous run
    SKIPPED = 4  # Stage is disabled in the configuration
    FAILED = 5  # Stage raised an error


class PipelineStageError(RuntimeError):
    """A pipeline stage failed. The cause is chained."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"Pipeline stage '{stage}' failed: {cause}")
        self.stage = stage


@dataclass(eq=False)
class ArtifactBundle:
    """Artifacts of a pipeline run, by name, and the status of every stage."""

    path: Path
    files: dict[str, Path] = field(default_factory=dict)
    stages: dict[str, StageStatus] = field(default_factory=lambda: dict.fromkeys(STAGES, StageStatus.PENDING))
    summary: dict = field(default_factory=dict)

    def write_text(self, name: str, text: str) -> Path:
        path = self.path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.files[name] = path
        return path

    def write_json(self, name: str, document: dict) -> Path:
        path = self.path / name
        write_json(document, path)
        self.files[name] = path
        return path

    def write_grid(self, name: str, raster: Raster) -> Path:
        path = self.path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        write_raw_grid(raster, path)
        self.files[name] = path
        return path

    def cached(self, *names: str) -> bool:
        """Whether all named artifacts exist, registering them if so."""
        paths = [self.path / name for name in names]
        if not all(p.is_file() for p in paths):
            return False
        self.files.update(zip(names, paths, strict=True))
        return True

    def manifest(self) -> dict:
        return {
            "stages": {stage: status.name.lower() for stage, status in self.stages.items()},
            "files": sorted(self.files),
            "summary": self.summary,
        }

    def write_manifest(self) -> Path:
        path = self.path / "manifest.json"
        write_json(self.manifest(), path)
        return path

    @property
    def complete(self) -> bool:
        return all(s in (StageStatus.DONE, StageStatus.CACHED, StageStatus.SKIPPED) for s in self.stages.values())

    def archive(self, archive_path: Path | None = None, overwrite: bool = False) -> Path:
        """Packs all artifacts and the manifest into a ``tar.gz`` archive under ``artifacts/``.

        Args:
            archive_path (Path | None): Archive destination without the ``.tar.gz`` suffix. Defaults to None (next to
                the output directory, with the same name).
            overwrite (bool): Whether to overwrite an existing archive. Defaults to False.

        Returns:
            Path: The archive.

        Raises:
            FileExistsError: If the archive destination already exists and overwrite is False.
        """
        archive_path = Path(archive_path) if archive_path is not None else self.path
        archive_file = archive_path.with_name(archive_path.name + ".tar.gz")
        if not overwrite and archive_file.exists():
            raise FileExistsError(f"Archive destination {archive_file} already exists.")
        manifest = self.write_manifest()
        logger.info(f"Archiving pipeline artifacts in {self.path} to {archive_file}")
        with tarfile.open(archive_file, "w:gz") as tar:
            for name, path in sorted({**self.files, "manifest.json": manifest}.items()):
                for member in (path, path.with_suffix(".json")) if name.endswith(".f32") else (path,):
                    logger.debug(f"Archiving file: {member}")
                    tar.add(member, arcname=Path("artifacts") / member.relative_to(self.path))
        return archive_file

    def __repr__(self) -> str:
        done = sum(s in (StageStatus.DONE, StageStatus.CACHED) for s in self.stages.values())
        return f"ArtifactBundle({self.path}, {done}/{len(self.stages)} stages, {len(self.files)} files)"


@contextmanager
def _stage(bundle: ArtifactBundle, name: str) -> Iterator[None]:
    logger.info(f"Pipeline stage '{name}'")
    try:
        yield
    except Exception as e:
        bundle.stages[name] = StageStatus.FAILED
        bundle.write_manifest()
        raise PipelineStageError(name, e) from e
    if bundle.stages[name] == StageStatus.PENDING:
        bundle.stages[name] = StageStatus.DONE


def load_terrain(config: PipelineConfig) -> tuple[ElevationGrid, ObstacleMask]:
    """Elevation and obstacles of the configured terrain. Without an obstacle file every cell is traversable."""
    terrain = config.terrain
    if terrain.is_synthetic:
        s = terrain.synthetic
        return synthetic_meadow(s.nrows, s.ncols, s.resolution, config.seed, s.n_hills, s.n_clumps, s.tree_height)
    dem = read_raster(terrain.dem, ElevationGrid)
    if terrain.obstacles is None:
        return dem, ObstacleMask(data=np.zeros(dem.shape), resolution=dem.resolution, origin=dem.origin)
    return dem, read_raster(terrain.obstacles, ObstacleMask)


def obstacle_cost_map(obstacles: ObstacleMask, cost: float = OBSTACLE_COST) -> CostMap:
    """Cost map with ``cost`` on obstacle cells and free space elsewhere."""
    data = np.where(np.asarray(obstacles.data, dtype=bool), cost, 0.0)
    return CostMap(data=data, resolution=obstacles.resolution, origin=obstacles.origin)


def check_routes(graph: TopoGraph, solution: OccupancySolution, routes: RobotRoutes):
    """Raises ValueError unless the routes aggregate to the solution and follow the graph's moves."""
    if not np.array_equal(routes.occupancy(graph), solution.p):
        raise ValueError("Allocated routes do not reproduce the solved occupancy!")
    if not routes.follows_moves(graph):
        raise ValueError("Allocated routes contain a move that is not in the action set!")


def run_pipeline(config: PipelineConfig, resume: bool = False) -> ArtifactBundle:
    """Runs every stage of the planning pipeline.

    Args:
        config (PipelineConfig): The configuration.
        resume (bool): Whether to reuse the graph and solution of a previous run in the output directory.
            Defaults to False.

    Returns:
        ArtifactBundle: The artifacts and stage statuses.

    Raises:
        PipelineStageError: If a stage fails. Artifacts of earlier stages are kept on disk.
    """
    bundle = ArtifactBundle(Path(config.output_dir))
    bundle.path.mkdir(parents=True, exist_ok=True)
    logger.info(f"Running pipeline into {bundle.path} with seed {config.seed}")

    graph: TopoGraph | None = None
    scenario: Scenario | None = None
    generated = None
    cached_graph = resume and bundle.cached("graph.json", "scenario.json")

    with _stage(bundle, "terrain"):
        dem, obstacles = load_terrain(config)
        bundle.write_grid("elevation.f32", dem)
        bundle.write_grid("obstacles.f32", obstacles)

    with _stage(bundle, "graphgen"):
        if cached_graph:
            graph = graph_from_dict(read_json(bundle.files["graph.json"]))
            scenario = scenario_from_dict(read_json(bundle.files["scenario.json"]))
            bundle.stages["graphgen"] = StageStatus.CACHED
            logger.info(f"Reusing {graph!r} from {bundle.files['graph.json']}")
        else:
            generated = generate_graph(
                dem, obstacles, config.observer_distribution(), config.graphgen, config.refine, seed=config.seed
            )
            graph = generated.graph
            scenario = config.scenario.build(graph, generated.edge_params)
            bundle.write_grid("visibility.f32", generated.visibility)
            bundle.write_grid("cover.f32", generated.visibility.with_data(generated.cover_mask.astype(float)))
            bundle.write_json("graph.json", graph_to_dict(graph))
            bundle.write_json("scenario.json", scenario_to_dict(scenario))
            bundle.write_json("graphgen.json", generated_to_dict(generated))
        bundle.summary["n_nodes"] = len(graph.nodes)
        bundle.summary["n_locations"] = len(graph.locations)
        bundle.summary["n_opportunities"] = len(graph.overwatch)

    with _stage(bundle, "validate"):
        violations = validate(graph, scenario)
        if violations:
            raise ValueError("; ".join(violations))

    with _stage(bundle, "model"):
        model = build_milp(graph, scenario)
        bundle.write_text("model.lp", export_lp(model))
        bundle.summary["n_variables"] = model.n_variables

    with _stage(bundle, "solve"):
        if cached_graph and bundle.cached("solution.json"):
            solution = solution_from_dict(read_json(bundle.files["solution.json"]))
            bundle.stages["solve"] = StageStatus.CACHED
        else:
            report = solve_milp(
                model, budget=config.solver.budget, method=config.solver.method, node_limit=config.solver.node_limit
            )
            if report.incumbent is None:
                raise RuntimeError(f"Solver ended with status {report.status.value} and no plan")
            solution = report.incumbent
            bundle.write_json("solution.json", solution_to_dict(solution))
            bundle.summary["status"] = report.status.value
            bundle.summary["solve_time"] = report.wall_time.total_seconds()
        problems = solution.check(graph, scenario)
        if problems:
            raise ValueError(f"Solution violates the model: {'; '.join(problems)}")
        bundle.summary["objective"] = solution.objective

    with _stage(bundle, "allocate"):
        routes = allocate_routes(graph, solution.p, scenario.start_locations())
        check_routes(graph, solution, routes)
        bundle.write_json("routes.json", routes_to_dict(routes))

    result = None
    with _stage(bundle, "simulate"):
        if not config.simulate:
            bundle.stages["simulate"] = StageStatus.SKIPPED
        else:
            cover = (
                generated.visibility.with_data(generated.cover_mask.astype(float))
                if generated is not None
                else read_raster(bundle.path / "cover.f32", VisibilityMap)
            )
            result = simulate_team(routes, graph, config.simulation, obstacle_cost_map(obstacles), cover)
            bundle.write_text("simulation.jsonl", result.to_jsonl())
            separation = result.min_separation()
            bundle.summary["min_separation"] = separation if np.isfinite(separation) else None

    with _stage(bundle, "metric"):
        if result is None:
            bundle.stages["metric"] = StageStatus.SKIPPED
        else:
            log = protection_log(result.records)
            bundle.write_json("protection.json", log.to_dict())
            moving = log.moving()
            if len(moving.robots) < len(log.robots):
                idle = sorted(set(log.robots) - set(moving.robots))
                logger.warning(f"Robots {idle} never moved and are left out of the protection metric")
            bundle.summary["protection"] = protection_metric(moving) if moving.entries else None

    with _stage(bundle, "render"):
        bundle.write_text("graph.svg", graph_svg(graph))
        bundle.write_text("graph.dot", graph_dot(graph))
        bundle.write_text("plan.svg", plan_svg(graph, routes))
        bundle.write_text("plan.dot", plan_dot(graph, routes))
        if generated is not None:
            bundle.write_text("visibility.svg", map_svg(generated.visibility))

    bundle.write_manifest()
    logger.info(f"Pipeline finished: {bundle!r}")
    return bundle
