from collections.abc import AsyncIterator
from pathlib import Path

import numpy as np
import pytest
import pytest_asyncio
from fastapi import FastAPI
from httpx import ASGITransport, AsyncClient

from consensus_dkf import router
from consensus_dkf.config import settings
from consensus_dkf.models import ExperimentConfig, NetworkSpec, PlantSpec
from consensus_dkf.network import ConsensusNetwork, build_named_topology
from consensus_dkf.system import (
    PlantModel,
    SensorSuite,
    Trajectory,
    default_node_types,
    make_tracking_model,
    make_tracking_sensors,
    simulate_batch,
)

app = FastAPI()
app.include_router(router)


@pytest.fixture(autouse=True)
def _init_settings(tmp_path: Path) -> None:
    """Initialize settings with some reasonable defaults for testing purposes."""
    settings.dkf_threads = 2
    settings.dkf_chunk_size = 7
    settings.dkf_output_dir = tmp_path / "out"
    settings.dkf_api_max_trials = 5


@pytest_asyncio.fixture
async def ac() -> AsyncIterator[AsyncClient]:
    """Provide an AsyncClient."""
    transport = ASGITransport(app=app)
    async with AsyncClient(transport=transport, base_url="http://test") as ac:
        yield ac


@pytest.fixture
def plant() -> PlantModel:
    """The constant-velocity tracking plant."""
    return make_tracking_model(0.1)


@pytest.fixture
def circle() -> ConsensusNetwork:
    """An eight-node ring."""
    return build_named_topology("circle", 8)


@pytest.fixture
def sensors() -> SensorSuite:
    """Cycled sensor types on eight nodes."""
    return make_tracking_sensors(default_node_types(8))


@pytest.fixture
def rng() -> np.random.Generator:
    """A seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_config() -> ExperimentConfig:
    """A quick experiment on a six-node ring."""
    return ExperimentConfig(
        name="small",
        network=NetworkSpec(kind="circle", node_count=6),
        plant=PlantSpec(horizon_steps=40),
        gammas=[2],
        trials=10,
        base_seed=3,
    )


@pytest.fixture
def trajectories(plant: PlantModel, sensors: SensorSuite) -> list[Trajectory]:
    """Four short runs of the ring's sensors."""
    return simulate_batch(plant, sensors, 25, range(4))


@pytest.fixture
def lone_sensor() -> SensorSuite:
    """One node that sees both positions."""
    C = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
    return SensorSuite((C,), (0.01 * np.eye(2),))
