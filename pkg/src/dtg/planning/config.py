# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Pipeline configuration.

A pipeline is configured by a single YAML file with the sections ``terrain``, ``observers``, ``graphgen``,
``refine``, ``scenario``, ``solver`` and ``simulation``, plus ``seed`` and ``output_dir``. Physical quantities
may be plain numbers in SI units or strings with units such as ``"80 m"`` or ``"1.5 m/s"``. Relative paths are
resolved against the directory of the configuration file.

Example::

    seed: 0
    terrain:
      dem: synthetic
    observers:
      - mean: [70, 45]
        covariance: [[9, 0], [0, 9]]
    scenario:
      n_robots: 3
      horizon: 8
      starts: [{point: [5, 5], count: 3}]
      goals: [{node: 4, count: 3}]
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import pint
from access.config import YAMLParser

from dtg.planning.allocation import LeaderParams
from dtg.planning.graph import Edge, EdgeCostParams, Scenario, TopoGraph
from dtg.planning.graphgen import GraphGenParams, RefineParams
from dtg.planning.local_planner import CostWeights, KinematicParams, MppiParams
from dtg.planning.simulation import SimulationParams
from dtg.planning.visibility import DEFAULT_EYE_HEIGHT, GaussianMixtureObserver

logger = logging.getLogger(__name__)

SYNTHETIC = "synthetic"

# Canonical unit of every dimensional field, per section
_UNITS: dict[str, dict[str, str]] = {
    "synthetic": {"resolution": "m", "tree_height": "m"},
    "observer": {"eye_height": "m"},
    "graphgen": {"d_max": "m", "eye_height": "m"},
    "refine": {"max_edge_len": "m", "max_ow_dist": "m"},
    "solver": {"budget": "s"},
    "kinematics": {
        "wheel_radius": "m",
        "wheel_base": "m",
        "v_min": "m/s",
        "v_max": "m/s",
        "a_max": "m/s**2",
        "dt": "s",
    },
    "leader": {"v_max": "m/s", "horizon": "s"},
    "simulation": {
        "follow_dist": "m",
        "r_t": "m",
        "r_p": "m",
        "delta_m": "m",
        "arrival_tolerance": "m",
        "min_progress": "m",
    },
}


def to_magnitude(value, unit: str, name: str) -> float:
    """Magnitude of a number or quantity string in ``unit``.

    Raises:
        ValueError: If the value cannot be parsed or has the wrong dimension.
    """
    if isinstance(value, int | float):
        return float(value)
    ureg = pint.get_application_registry()
    try:
        return float(ureg.Quantity(str(value)).to(unit).magnitude)
    except pint.DimensionalityError as e:
        raise ValueError(f"Config value {name}={value!r} cannot be converted to {unit}!") from e
    except (pint.UndefinedUnitError, ValueError, AttributeError) as e:
        raise ValueError(f"Config value {name}={value!r} is not a number or quantity!") from e


def _require(data: Mapping, key: str, section: str):
    if data is None or key not in data:
        raise KeyError(f"Missing config key '{section}.{key}'")
    return data[key]


def _section(cls, data: Mapping | None, section: str, units: Mapping[str, str] | None = None, **nested):
    """Builds a dataclass from a config mapping, converting quantities and rejecting unknown keys."""
    data = dict(data or {})
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"Unknown keys in config section '{section}': {unknown}")
    units = units or {}
    kwargs = {}
    for key, value in data.items():
        if key in nested:
            continue
        if key in units:
            value = to_magnitude(value, units[key], f"{section}.{key}")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    kwargs.update({key: obj for key, obj in nested.items() if key in data})
    return cls(**kwargs)


@dataclass(frozen=True)
class LocationSpec:
    """A start or goal given by node id or by a world point snapping to the nearest node."""

    count: int
    node: int | None = None
    point: tuple[float, float] | None = None

    def resolve(self, graph: TopoGraph) -> Edge:
        """The self-loop location of the node.

        Raises:
            ValueError: If the node is not in the graph or neither node nor point is given.
        """
        if self.node is not None:
            if self.node not in graph.nodes:
                raise ValueError(f"Node {self.node} is not in the graph!")
            return (self.node, self.node)
        if self.point is None:
            raise ValueError("A start or goal needs a node or a point!")
        ids = graph.node_ids
        if not ids:
            raise ValueError("Cannot snap a point to an empty graph!")
        distances = [float(np.linalg.norm(graph.node_point(v) - np.asarray(self.point))) for v in ids]
        v = ids[int(np.argmin(distances))]
        return (v, v)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "LocationSpec":
        point = data.get("point")
        return cls(
            count=int(data.get("count", 1)),
            node=int(data["node"]) if data.get("node") is not None else None,
            point=tuple(float(c) for c in point) if point is not None else None,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    n_robots: int
    horizon: int
    starts: tuple[LocationSpec, ...]
    goals: tuple[LocationSpec, ...] = ()
    time_weight: float = 1.0
    a: int = 1  # Defaults applied to every edge
    m: float = 0.0
    r: float = 0.0

    def build(self, graph: TopoGraph, edge_params: Mapping[Edge, EdgeCostParams]) -> Scenario:
        """Scenario on a generated graph, with the configured vulnerability and teaming on every edge."""
        starts: dict[Edge, int] = {}
        for spec in self.starts:
            loc = spec.resolve(graph)
            starts[loc] = starts.get(loc, 0) + spec.count
        goals: dict[Edge, int] = {}
        for spec in self.goals:
            loc = spec.resolve(graph)
            goals[loc] = goals.get(loc, 0) + spec.count
        params = {e: replace(p, a=self.a, m=self.m, r=self.r) for e, p in edge_params.items()}
        return Scenario(
            n_robots=self.n_robots,
            horizon=self.horizon,
            starts=starts,
            goals=goals,
            edge_params=params,
            time_weight=self.time_weight,
        )


@dataclass(frozen=True)
class SolverConfig:
    method: str = "highs"
    budget: float | None = None  # Seconds
    node_limit: int | None = None


@dataclass(frozen=True)
class SyntheticTerrain:
    nrows: int = 60
    ncols: int = 80
    resolution: float = 1.0
    n_hills: int = 3
    n_clumps: int = 10
    tree_height: float = 8.0


@dataclass(frozen=True)
class TerrainConfig:
    dem: Path | str = SYNTHETIC
    obstacles: Path | None = None
    synthetic: SyntheticTerrain = field(default_factory=SyntheticTerrain)

    @property
    def is_synthetic(self) -> bool:
        return self.dem == SYNTHETIC


@dataclass(frozen=True)
class ObserverConfig:
    mean: tuple[float, float]
    covariance: tuple = ((0.0, 0.0), (0.0, 0.0))
    weight: float = 1.0
    eye_height: float = DEFAULT_EYE_HEIGHT


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline run needs."""

    terrain: TerrainConfig
    observers: tuple[ObserverConfig, ...]
    scenario: ScenarioConfig
    graphgen: GraphGenParams = field(default_factory=GraphGenParams)
    refine: RefineParams = field(default_factory=RefineParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    simulation: SimulationParams = field(default_factory=SimulationParams)
    simulate: bool = True
    seed: int = 0
    output_dir: Path = Path("dtg-output")

    def observer_distribution(self) -> GaussianMixtureObserver:
        """The observers as one Gaussian mixture. All components share the first component's eye height.

        Raises:
            ValueError: If no observer is configured.
        """
        if not self.observers:
            raise ValueError("At least one observer is required!")
        return GaussianMixtureObserver(
            means=np.array([o.mean for o in self.observers], dtype=float),
            covariances=np.array([o.covariance for o in self.observers], dtype=float),
            weights=np.array([o.weight for o in self.observers], dtype=float),
            eye_height=self.observers[0].eye_height,
        )


def _path(value, base_dir: Path, name: str) -> Path:
    path = Path(value)
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise FileNotFoundError(f"Config {name} refers to a missing file: {path}")
    return path


def _simulation(data: Mapping | None) -> tuple[SimulationParams, bool]:
    data = dict(data or {})
    enabled = bool(data.pop("enabled", True))
    nested = {
        "kinematics": _section(KinematicParams, data.get("kinematics"), "simulation.kinematics", _UNITS["kinematics"]),
        "mppi": _section(MppiParams, data.get("mppi"), "simulation.mppi"),
        "weights": _section(CostWeights, data.get("weights"), "simulation.weights"),
        "leader": _section(
            LeaderParams,
            {"v_max": 1.0, "horizon": 3.0, **(data.get("leader") or {})},
            "simulation.leader",
            _UNITS["leader"],
        ),
    }
    return _section(SimulationParams, data, "simulation", _UNITS["simulation"], **nested), enabled


def config_from_dict(data: Mapping, base_dir: Path = Path(".")) -> PipelineConfig:
    """Builds a configuration from parsed YAML.

    Args:
        data (Mapping): Parsed configuration.
        base_dir (Path): Directory relative paths are resolved against. Defaults to the working directory.

    Returns:
        PipelineConfig: The configuration.

    Raises:
        KeyError: If a required key is missing.
        ValueError: If a value is invalid or a key unknown.
        FileNotFoundError: If a referenced file does not exist.
    """
    base_dir = Path(base_dir)
    terrain_data = dict(_require(data, "terrain", "") or {})
    dem = _require(terrain_data, "dem", "terrain")
    terrain = TerrainConfig(
        dem=SYNTHETIC if dem == SYNTHETIC else _path(dem, base_dir, "terrain.dem"),
        obstacles=_path(terrain_data["obstacles"], base_dir, "terrain.obstacles")
        if terrain_data.get("obstacles")
        else None,
        synthetic=_section(SyntheticTerrain, terrain_data.get("synthetic"), "terrain.synthetic", _UNITS["synthetic"]),
    )
    if not terrain.is_synthetic and terrain.obstacles is None:
        logger.info("No obstacle mask configured, every cell is traversable")

    observers = tuple(
        _section(ObserverConfig, o, "observers", _UNITS["observer"]) for o in _require(data, "observers", "")
    )

    scenario_data = dict(_require(data, "scenario", ""))
    for key in ("n_robots", "horizon", "starts"):
        _require(scenario_data, key, "scenario")
    starts = tuple(LocationSpec.from_mapping(s) for s in scenario_data["starts"])
    goals = tuple(LocationSpec.from_mapping(g) for g in scenario_data.get("goals") or [])
    scenario = _section(ScenarioConfig, scenario_data, "scenario", starts=starts, goals=goals)

    simulation, enabled = _simulation(data.get("simulation"))
    output_dir = Path(data.get("output_dir", "dtg-output"))
    return PipelineConfig(
        terrain=terrain,
        observers=observers,
        scenario=scenario,
        graphgen=_section(GraphGenParams, data.get("graphgen"), "graphgen", _UNITS["graphgen"]),
        refine=_section(RefineParams, data.get("refine"), "refine", _UNITS["refine"]),
        solver=_section(SolverConfig, data.get("solver"), "solver", _UNITS["solver"]),
        simulation=simulation,
        simulate=enabled,
        seed=int(data.get("seed", 0)),
        output_dir=output_dir if output_dir.is_absolute() else base_dir / output_dir,
    )


def load_config(path: Path) -> PipelineConfig:
    """Reads a pipeline configuration file.

    Raises:
        FileNotFoundError: If the file does not exist.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    data = YAMLParser().parse(path.read_text())
    config = config_from_dict(data, path.parent)
    logger.info(f"Loaded pipeline config from {path}")
    return config
