# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Metrics reported by the planner: solver statistics and the team's level of protection.

Protection
----------
A robot is protected while it moves in one of three ways:

overwatched
    Traversing an edge while robots wait at a node watching it.
formation
    Traversing an edge with at least one coalition member within twice the following distance.
cover
    Inside a cover region.

For every robot the distances travelled under each form are summed over edges and divided by the robot's total
distance. The protection metric is the mean over robots of the sum of the three fractions, so it lies in [0, 3]
for unit weights.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import pint_xarray  # noqa: F401
import xarray as xr
from pint import Unit

from dtg.planning.graph import Edge

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PlanMetric:
    """A quantity reported about a plan or a solver run, used to key benchmark and report variables.

    Raises:
        ValueError: If name or description are empty or whitespace-only strings.
    """

    name: str
    units: Unit
    description: str

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("Metric name cannot be empty!")
        if not self.description.strip():
            raise ValueError(f"Metric '{self.name}' needs a description!")

    def __str__(self) -> str:
        return self.name

    def quantify(self, values: np.ndarray, dims: Sequence[str]) -> xr.DataArray:
        """Raw values as a DataArray in the units of the metric."""
        return xr.DataArray(values, dims=list(dims), name=self.name).pint.quantify(self.units)


solve_time = PlanMetric("solve time", Unit("second"), "Wall time to solve the model")
n_variables = PlanMetric("variables", Unit("dimensionless"), "Number of model variables")
objective = PlanMetric("objective", Unit("dimensionless"), "Objective value of the best plan found")
nodes_explored = PlanMetric("nodes", Unit("dimensionless"), "Branch and bound nodes explored")
protection = PlanMetric("protection", Unit("dimensionless"), "Mean protected fraction of distance travelled")


@dataclass(frozen=True)
class EdgeProtection:
    """Distances in metres travelled by one robot on one location, in total and under each form of protection.

    Raises:
        ValueError: If a distance is negative or a protected distance exceeds the total.
    """

    total: float
    overwatched: float = 0.0
    formation: float = 0.0
    cover: float = 0.0

    def __post_init__(self):
        parts = (self.overwatched, self.formation, self.cover)
        if self.total < 0 or min(parts) < 0:
            raise ValueError(f"Distances must be nonnegative, got {self}!")
        if max(parts) > self.total * (1 + 1e-12):
            raise ValueError(f"Protected distance exceeds the total distance in {self}!")


@dataclass(eq=False)
class ProtectionLog:
    """Protected distances per robot and per location."""

    entries: dict[str, dict[Edge, EdgeProtection]] = field(default_factory=dict)

    def add(self, robot: str, location: Edge, distance: float, overwatched: bool, formation: bool, cover: bool):
        """Adds a stretch of ``distance`` metres travelled by ``robot`` at ``location``."""
        edges = self.entries.setdefault(robot, {})
        old = edges.get(location, EdgeProtection(0.0))
        edges[location] = EdgeProtection(
            total=old.total + distance,
            overwatched=old.overwatched + distance * overwatched,
            formation=old.formation + distance * formation,
            cover=old.cover + distance * cover,
        )

    def total_distance(self, robot: str) -> float:
        return sum(e.total for e in self.entries.get(robot, {}).values())

    @property
    def robots(self) -> tuple[str, ...]:
        return tuple(sorted(self.entries))

    def moving(self) -> "ProtectionLog":
        """The log restricted to robots that travelled a positive distance."""
        return ProtectionLog({robot: edges for robot, edges in self.entries.items() if self.total_distance(robot) > 0})

    def to_dict(self) -> dict:
        return {
            robot: [
                {
                    "location": list(loc),
                    "total": e.total,
                    "overwatched": e.overwatched,
                    "formation": e.formation,
                    "cover": e.cover,
                }
                for loc, e in sorted(edges.items())
            ]
            for robot, edges in sorted(self.entries.items())
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProtectionLog":
        return cls(
            entries={
                robot: {
                    tuple(item["location"]): EdgeProtection(
                        item["total"], item["overwatched"], item["formation"], item["cover"]
                    )
                    for item in items
                }
                for robot, items in data.items()
            }
        )


def protection_metric(log: ProtectionLog, weights: Sequence[float] = (1.0, 1.0, 1.0)) -> float:
    """Team protection: mean over robots of the weighted protected fractions of their distance travelled.

    Args:
        log (ProtectionLog): Protected distances.
        weights (Sequence[float]): Weights of the overwatched, formation and cover fractions. Defaults to ones.

    Returns:
        float: The metric, in [0, 3] for unit weights.

    Raises:
        ValueError: If the log is empty, a robot travelled no distance or the weights are not three nonnegative
            numbers.
    """
    if len(weights) != 3 or min(weights) < 0:
        raise ValueError(f"Expected three nonnegative protection weights, got {tuple(weights)}!")
    if not log.entries:
        raise ValueError("Cannot compute protection for an empty log!")
    w_o, w_f, w_c = weights
    per_robot = []
    for robot in log.robots:
        total = log.total_distance(robot)
        if total <= 0:
            raise ValueError(f"Robot {robot} travelled no distance!")
        protected = sum(w_o * e.overwatched + w_f * e.formation + w_c * e.cover for e in log.entries[robot].values())
        per_robot.append(protected / total)
    value = float(np.mean(per_robot))
    logger.info(f"Protection over {len(per_robot)} robots: {value:.3f}")
    return value


def protection_log(records) -> ProtectionLog:
    """Protected distances from simulation step records.

    The stretch between two consecutive records of a robot is charged to the location and flags of the later one.

    Args:
        records (Iterable[StepRecord]): Records, in simulation order.

    Returns:
        ProtectionLog: The log.
    """
    log = ProtectionLog()
    last: dict[str, np.ndarray] = {}
    for record in records:
        position = record.state.position
        if record.robot in last:
            distance = float(np.linalg.norm(position - last[record.robot]))
            log.add(record.robot, record.location, distance, record.overwatched, record.in_formation, record.in_cover)
        else:
            log.entries.setdefault(record.robot, {})
        last[record.robot] = position
    return log
