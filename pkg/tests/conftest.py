import math

import numpy as np
import pytest

from src.channel import ChannelParams
from src.config import ExperimentConfig, RunConfig, ScenarioConfig
from src.experiment_runner import random_audit_instance
from src.scenario import ProblemInstance


@pytest.fixture
def params() -> ChannelParams:
    return ChannelParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def two_vehicle_instance() -> ProblemInstance:
    """Two vehicles sharing one cluster with two slots, rates 4 and 2."""
    return ProblemInstance.from_rate_matrix([[4.0], [2.0]], capacity_alpha=2)


@pytest.fixture
def delta_fixture() -> ProblemInstance:
    """Three isolated contests whose terminal availability depends on delta.

    Vehicles 0 and 1 only reach cluster 0, vehicles 2 and 3 only reach
    cluster 1 and vehicle 4 is alone on cluster 2.
    """
    rates = np.zeros((5, 3))
    rates[0, 0] = math.exp(0.0006)
    rates[1, 0] = math.exp(0.000255)
    rates[2, 1] = math.exp(0.000285)
    rates[3, 1] = math.exp(0.000255)
    rates[4, 2] = math.exp(3.0)
    return ProblemInstance.from_rate_matrix(rates, capacity_alpha=1)


@pytest.fixture
def small_instances():
    """Random instances with M <= 6, N <= 3, V <= 3 and some dead links."""
    rng = np.random.default_rng(2024)
    return [random_audit_instance(rng) for _ in range(200)]


@pytest.fixture
def small_config(tmp_path) -> ExperimentConfig:
    """A fast experiment: 8 vehicles, 3 clusters, 3 replications."""
    return ExperimentConfig(
        scenario=ScenarioConfig(num_vehicles=8, num_clusters=3, v_slots=3),
        run=RunConfig(seed=7, replications=3, output_dir=str(tmp_path / "out")),
    )
