"""Session-wide fixtures: the standard duct pipeline, built once and shared.

Everything downstream (partition, fit, simulation) is deterministic for a
fixed seed, so unit tests and the acceptance battery can safely share these.
"""

import pytest

from fluidswarm import (FitConfig, SimConfig, fit_grid, generate_quasi1d_field,
                        partition_domain, run_simulation)


@pytest.fixture(scope="session")
def field():
    """Analytic reference flow on the default duct (151 stations, 6 rings)."""
    return generate_quasi1d_field()


@pytest.fixture(scope="session")
def grid(field):
    """Default 0.5 m partition of the duct."""
    return partition_domain(field)


@pytest.fixture(scope="session")
def fit(grid):
    return fit_grid(grid, FitConfig(rng_seed=0))


@pytest.fixture(scope="session")
def trace60(grid, fit):
    """The standard 60 s reservoir run (scale 0.1, dt 0.05, seed 0)."""
    cfg = SimConfig(case="reservoir", dt=0.05, duration=60.0, scale=0.1, seed=0)
    return run_simulation(grid, fit, cfg)
