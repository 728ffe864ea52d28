# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

from unittest import mock

import numpy as np
import pytest
import xarray as xr

from dtg.planning.bench import bench_suite, formulation_speedup, plot_bench
from dtg.planning.metrics import n_variables, nodes_explored, objective, solve_time


@pytest.fixture()
def simple_bench_data():
    """Fixture instantiating a dataset containing benchmark data.

    The mock data covers one density, teams of 1 and 2 robots and one seed:
        - MILP solve times: [1 s, 2 s], 40 and 80 variables
        - GMIP solve times: [4 s, 4 s], 60 and 200 variables
    """
    dims = ["formulation", "density", "n_robots", "seed"]
    times = np.array([[1.0, 2.0], [4.0, 4.0]]).reshape(2, 1, 2, 1)
    sizes = np.array([[40.0, 80.0], [60.0, 200.0]]).reshape(2, 1, 2, 1)
    return xr.Dataset(
        data_vars={
            solve_time: xr.DataArray(times, dims=dims).pint.quantify("seconds"),
            n_variables: xr.DataArray(sizes, dims=dims).pint.quantify("dimensionless"),
        },
        coords={"formulation": ["milp", "gmip"], "density": [0.5], "n_robots": [1, 2], "seed": [0]},
    )


def test_formulation_speedup(simple_bench_data):
    """Test formulation speedup calculation."""
    speedup = formulation_speedup(simple_bench_data)

    assert speedup.name == "speedup"
    assert str(speedup.pint.units) == "dimensionless"
    assert speedup.shape == (1, 2, 1)
    speedup = speedup.pint.dequantify()  # Dequantify to remove warnings when getting values
    assert speedup.sel(density=0.5, n_robots=1, seed=0).values == pytest.approx(4.0)
    assert speedup.sel(density=0.5, n_robots=2, seed=0).values == pytest.approx(2.0)


def test_incorrect_units(simple_bench_data):
    """Test calculation with incorrect units."""
    with pytest.raises(ValueError, match="Metric units must be time"):
        formulation_speedup(simple_bench_data, n_variables)


@mock.patch("matplotlib.pyplot.show", autospec=True)
def test_plot_bench(mock_plt, simple_bench_data):
    """Test plotting benchmark data. Currently only checks that the function runs without errors."""
    plot_bench(simple_bench_data)
    mock_plt.assert_called_once()


def test_bench_suite():
    """Test a small benchmark run of both formulations."""
    stats = bench_suite(densities=(0.5,), team_sizes=(1, 2), n_nodes=4, seeds=(0,), budget=30.0, max_horizon=5)

    assert list(stats["formulation"].values) == ["milp", "gmip"]
    assert list(stats["n_robots"].values) == [1, 2]
    assert stats[solve_time].shape == (2, 1, 2, 1)
    assert str(stats[solve_time].pint.units) == "second"
    values = stats.pint.dequantify()
    assert np.all(values[solve_time].values >= 0)
    assert np.all(values[nodes_explored].values >= 0)
    # Both formulations describe the same plans, so their optima agree
    milp = values[objective].sel(formulation="milp").values
    gmip = values[objective].sel(formulation="gmip").values
    np.testing.assert_allclose(milp, gmip)
    # The per-robot formulation is never smaller
    sizes = values[n_variables]
    assert np.all(sizes.sel(formulation="gmip").values >= sizes.sel(formulation="milp").values)
