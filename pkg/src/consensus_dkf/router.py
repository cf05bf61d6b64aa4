"""HTTP routes for the lab."""

from typing import Annotated, Literal

from fastapi import APIRouter, HTTPException, Query
from starlette import status

from .dependencies import GetSettings
from .harness import qws_benchmark, run_experiment, steady_state_report
from .models import (
    ExperimentConfig,
    ExperimentReport,
    NetworkSpec,
    QwsBenchmarkReport,
    SteadyStateReport,
    TopologyResponse,
)
from .network import build_network

router = APIRouter()

type ServedTopology = Literal["geometric", "line", "circle", "small_world", "complete"]


def _unprocessable(error: Exception) -> HTTPException:
    return HTTPException(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(error)
    )


def _check_config(config: ExperimentConfig) -> None:
    if config.network.kind == "file":
        msg = "file networks are not accepted over HTTP"
        raise _unprocessable(ValueError(msg))


@router.get("/topologies/{kind}")
def topology(
    kind: ServedTopology,
    node_count: Annotated[int, Query(ge=2, le=500)] = 20,
    seed: int = 0,
) -> TopologyResponse:
    """Generate a topology with Metropolis weights and its spectral summary."""
    try:
        network = build_network(
            NetworkSpec(kind=kind, node_count=node_count, seed=seed)
        )
    except ValueError as e:
        raise _unprocessable(e) from e
    spectral = network.spectral_data()
    return TopologyResponse(
        network=network.to_file(),
        lambda2=spectral.lambda2,
        diameter=spectral.diameter,
        connected=spectral.connected,
    )


@router.post("/steady-state")
def steady_state(config: ExperimentConfig) -> SteadyStateReport:
    """Predict the steady covariances of every algorithm in the config."""
    _check_config(config)
    try:
        return steady_state_report(config)
    except ValueError as e:
        raise _unprocessable(e) from e


@router.post("/qws-bench")
def qws_bench(
    config: ExperimentConfig,
    replicas: Annotated[int, Query(ge=1, le=1000)] = 200,
    steps: Annotated[int | None, Query(ge=1, le=200)] = None,
) -> QwsBenchmarkReport:
    """Benchmark the QWS estimators on the config's network."""
    _check_config(config)
    try:
        return qws_benchmark(config, replicas=replicas, steps=steps)
    except ValueError as e:
        raise _unprocessable(e) from e


@router.post("/experiments")
def experiments(config: ExperimentConfig, settings: GetSettings) -> ExperimentReport:
    """Run an experiment, with the trial count capped for HTTP callers."""
    _check_config(config)
    trials = min(config.trials, settings.dkf_api_max_trials)
    try:
        return run_experiment(config, trials=trials)
    except ValueError as e:
        raise _unprocessable(e) from e
