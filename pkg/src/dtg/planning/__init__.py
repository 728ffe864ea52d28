"""
dtg-planning package.
"""

from contextlib import suppress
from importlib.metadata import PackageNotFoundError, version

__version__ = "unknown"
with suppress(PackageNotFoundError):
    __version__ = version("dtg-planning")

from dtg.planning.allocation import RobotRoutes, allocate_routes
from dtg.planning.config import PipelineConfig, load_config
from dtg.planning.graph import EdgeCostParams, OverwatchOpportunity, Scenario, TopoGraph, validate
from dtg.planning.graphgen import generate_graph
from dtg.planning.metrics import ProtectionLog, protection_metric
from dtg.planning.model import OccupancySolution, build_gmip, build_milp
from dtg.planning.pipeline import ArtifactBundle, run_pipeline
from dtg.planning.simulation import simulate_team
from dtg.planning.solver import brute_force_solve, solve_milp

__all__ = [
    "TopoGraph",
    "OverwatchOpportunity",
    "EdgeCostParams",
    "Scenario",
    "validate",
    "build_milp",
    "build_gmip",
    "OccupancySolution",
    "solve_milp",
    "brute_force_solve",
    "generate_graph",
    "RobotRoutes",
    "allocate_routes",
    "simulate_team",
    "ProtectionLog",
    "protection_metric",
    "PipelineConfig",
    "load_config",
    "ArtifactBundle",
    "run_pipeline",
]
