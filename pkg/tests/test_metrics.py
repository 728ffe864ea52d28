# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

from dataclasses import FrozenInstanceError

import numpy as np
import pytest
from pint import Unit

from dtg.planning.local_planner import RobotState
from dtg.planning.metrics import (
    EdgeProtection,
    PlanMetric,
    ProtectionLog,
    protection,
    protection_log,
    protection_metric,
    solve_time,
)
from dtg.planning.simulation import StepRecord


def _record(robot, step, x, location=(1, 2), overwatched=False, in_formation=False, in_cover=False):
    return StepRecord(
        robot=robot,
        graph_step=1,
        step=step,
        state=RobotState(x, 0.0, 0.0),
        location=location,
        role=None,
        in_cover=in_cover,
        in_formation=in_formation,
        overwatched=overwatched,
    )


def test_metric():
    """Test that metrics are frozen and print as their name"""
    metric = PlanMetric("test_name", Unit("second"), "test_description")
    assert metric.name == "test_name"
    assert metric.units == "second"
    assert metric.description == "test_description"
    assert f"{metric}" == "test_name"
    assert f"{protection}" == "protection"
    with pytest.raises(FrozenInstanceError):
        metric.name = "other"


def test_metric_quantify():
    """Test that raw values are wrapped in the units of the metric"""
    values = solve_time.quantify(np.array([[1.0, 2.0]]), ["formulation", "seed"])
    assert values.dims == ("formulation", "seed")
    assert values.pint.dimensionality == "[time]"
    np.testing.assert_array_equal(values.pint.dequantify().values, [[1.0, 2.0]])


def test_metric_empty_name():
    """Test initialization with empty name"""
    with pytest.raises(ValueError, match="name cannot be empty"):
        PlanMetric(" ", Unit("second"), "test_description")


def test_metric_empty_description():
    """Test initialization with empty description"""
    with pytest.raises(ValueError, match="'test_name' needs a description"):
        PlanMetric("test_name", Unit("second"), "")


def test_protection_in_cover():
    """Test that a robot moving entirely in cover has protection 1."""
    log = ProtectionLog()
    log.add("a", (1, 2), 10.0, overwatched=False, formation=False, cover=True)
    assert protection_metric(log) == pytest.approx(1.0)


def test_protection_additive():
    """Test that the forms of protection add up."""
    log = ProtectionLog()
    log.add("a", (1, 2), 4.0, overwatched=True, formation=False, cover=True)
    log.add("a", (2, 3), 6.0, overwatched=True, formation=False, cover=True)
    assert protection_metric(log) == pytest.approx(2.0)
    assert protection_metric(log, weights=(0.5, 1.0, 0.0)) == pytest.approx(0.5)


def test_protection_mean():
    """Test that the metric is the mean over robots."""
    log = ProtectionLog()
    log.add("a", (1, 2), 10.0, overwatched=False, formation=False, cover=True)
    log.add("b", (1, 2), 5.0, overwatched=False, formation=True, cover=False)
    log.add("b", (2, 2), 5.0, overwatched=False, formation=False, cover=False)
    assert protection_metric(log) == pytest.approx(0.75)


def test_protection_errors():
    """Test that empty logs, idle robots and bad weights are refused."""
    with pytest.raises(ValueError, match="empty log"):
        protection_metric(ProtectionLog())
    log = ProtectionLog()
    log.add("a", (1, 1), 0.0, overwatched=False, formation=False, cover=False)
    with pytest.raises(ValueError, match="Robot a travelled no distance"):
        protection_metric(log)
    with pytest.raises(ValueError, match="three nonnegative"):
        protection_metric(log, weights=(1.0, -1.0, 1.0))


def test_edge_protection_checks():
    """Test that negative or excessive distances are refused."""
    with pytest.raises(ValueError, match="nonnegative"):
        EdgeProtection(total=-1.0)
    with pytest.raises(ValueError, match="exceeds the total"):
        EdgeProtection(total=1.0, cover=2.0)


def test_protection_log_from_records():
    """Test that stretches are charged to the flags of the later record."""
    records = [
        _record("a", 0, 0.0),
        _record("b", 0, 10.0, location=(3, 3)),
        _record("a", 1, 1.0, overwatched=True),
        _record("b", 1, 10.0, location=(3, 3)),
        _record("a", 2, 3.0, in_cover=True, in_formation=True),
    ]
    log = protection_log(records)
    assert log.robots == ("a", "b")
    assert log.total_distance("a") == pytest.approx(3.0)
    edge = log.entries["a"][(1, 2)]
    assert edge.overwatched == pytest.approx(1.0)
    assert edge.cover == pytest.approx(2.0)
    assert edge.formation == pytest.approx(2.0)

    moving = log.moving()
    assert moving.robots == ("a",)
    assert protection_metric(moving) == pytest.approx((1.0 + 2.0 + 2.0) / 3.0)


def test_protection_log_dict():
    """Test the dictionary form of a log."""
    log = ProtectionLog()
    log.add("a", (1, 2), 2.0, overwatched=True, formation=False, cover=False)
    data = log.to_dict()
    assert data == {"a": [{"location": [1, 2], "total": 2.0, "overwatched": 2.0, "formation": 0.0, "cover": 0.0}]}
    assert ProtectionLog.from_dict(data).entries == log.entries
