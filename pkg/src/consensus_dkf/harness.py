"""
Monte Carlo experiments, steady-state theory sweeps and report files.

Trials run in chunks on a thread pool. Every trial has its own seed, and
chunk results are combined in chunk order, so reports do not depend on the
number of workers. All cells of a sweep filter the same trajectories.
"""

import json
import logging
import math
import time
import tomllib
from collections.abc import Iterable, Sequence
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass
from datetime import UTC, datetime
from itertools import product
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .config import settings
from .filters import FilterOptions, run_filter
from .models import (
    Algorithm,
    CellResult,
    CellStatus,
    DegradationRow,
    ExperimentConfig,
    ExperimentReport,
    NetworkSummary,
    QwsBenchmarkReport,
    QwsDiagnosticRow,
    SteadyStateFailure,
    SteadyStateReport,
    SteadyStateRow,
)
from .network import ConsensusNetwork, build_network
from .qws import (
    direct_bound_start,
    direct_error_bound,
    direct_init,
    direct_round,
    exact_qws_oracle,
    factor_all,
    stochastic_init,
    stochastic_moment_predictions,
    stochastic_round,
)
from .riccati import SteadyStatePrediction, steady_ckf, steady_state
from .system import (
    PlantModel,
    SensorSuite,
    Trajectory,
    default_node_types,
    make_tracking_model,
    make_tracking_sensors,
    simulate_batch,
)
from .utils import Array, min_eig, pinv_sym

logger = logging.getLogger(__name__)

type ReportFormat = Literal["csv", "json"]
type AnyReport = ExperimentReport | QwsBenchmarkReport | SteadyStateReport

REPORT_FORMATS: tuple[ReportFormat, ...] = ("csv", "json")
MSE_COLUMNS = ["experiment", "algorithm", "gamma", "eta", "node", "k", "mse", "theory"]
QWS_COLUMNS = [
    "step",
    "node",
    "direct_error",
    "direct_inverse_error",
    "bound_exact",
    "bound_spectral",
    "consensus_count",
    "direct_relative_error",
    "stochastic_mse",
    "stochastic_predicted",
]
QWS_DIAGNOSTICS_FILE = "qws_diagnostics.csv"
BOUND_SLACK = 1e-9
PREDICTION_TOLERANCE = 0.1


@dataclass(frozen=True, eq=False)
class LabSetup:
    """The network, plant and sensors an experiment config describes."""

    network: ConsensusNetwork
    plant: PlantModel
    sensors: SensorSuite

    def network_at(self, eta: float) -> ConsensusNetwork:
        """Return the network with its weights blended towards the identity."""
        return self.network.blend(eta) if eta else self.network


def load_config(path: Path) -> ExperimentConfig:
    """
    Read an experiment config from a JSON or TOML file.

    A relative network file path is resolved against the config's directory.
    """
    with path.open("rb") as f:
        data = tomllib.load(f) if path.suffix == ".toml" else json.load(f)
    config = ExperimentConfig.model_validate(data)
    network_path = config.network.path
    if network_path is not None and not network_path.is_absolute():
        network = config.network.model_copy(update={"path": path.parent / network_path})
        config = config.model_copy(update={"network": network})
    return config


def restrict_sweep(
    config: ExperimentConfig,
    axis: Literal["gamma", "eta"],
) -> ExperimentConfig:
    """Keep the full sweep on ``axis`` and only the first value of the other."""
    if axis == "gamma":
        return config.model_copy(update={"etas": config.etas[:1]})
    return config.model_copy(update={"gammas": config.gammas[:1]})


def build_setup(config: ExperimentConfig) -> LabSetup:
    """Build the network, the tracking plant and the sensor suite."""
    network = build_network(config.network)
    spec = config.plant
    plant = make_tracking_model(spec.sampling_interval, spec.x0_mean, spec.p0_scale)
    types = spec.node_types or default_node_types(network.node_count)
    if len(types) != network.node_count:
        msg = (
            f"node_types lists {len(types)} sensors for "
            f"{network.node_count} nodes"
        )
        raise ValueError(msg)
    sensors = make_tracking_sensors(types, spec.sampling_interval)
    return LabSetup(network=network, plant=plant, sensors=sensors)


def posterior_theory_trace(
    prediction: SteadyStatePrediction | None,
    *,
    actual: bool = True,
) -> Array:
    """
    Per-node trace of a steady posterior covariance.

    With ``actual`` the covariance of the real error is used, otherwise the
    covariance the filter reports.
    """
    if prediction is None:
        msg = "missing riccati solution"
        raise ValueError(msg)
    cov = prediction.posterior_actual if actual else prediction.posterior_estimated
    return np.trace(cov, axis1=-2, axis2=-1)


@dataclass(frozen=True, eq=False)
class _ChunkStats:
    squared_error: Array
    """Summed over trials, shape ``(K, N)``."""
    trial_mmse: Array
    error_outer: Array
    """Posterior error outer products summed over trials and the window."""
    reported: Array
    """Reported posterior covariances summed over trials and the window."""


def _run_chunk(
    algorithm: Algorithm,
    trajectories: Sequence[Trajectory],
    network: ConsensusNetwork,
    gamma: int,
    setup: LabSetup,
    options: FilterOptions,
    window: tuple[int, int],
) -> _ChunkStats:
    history = run_filter(
        algorithm, trajectories, network, gamma, setup.plant, setup.sensors, options
    )
    states = np.stack([t.states[1:] for t in trajectories])
    error = history.x_post - states[:, :, None, :]
    squared = np.sum(error**2, axis=-1)
    steady = slice(window[0] - 1, window[1])
    batch = len(trajectories)
    reported = history.P_post[:, steady].sum(axis=(0, 1))
    reported *= batch / history.P_post.shape[0]
    return _ChunkStats(
        squared_error=squared.sum(axis=0),
        trial_mmse=squared[:, steady].mean(axis=(1, 2)),
        error_outer=np.einsum("bkia,bkic->iac", error[:, steady], error[:, steady]),
        reported=reported,
    )


def _theory(
    algorithm: Algorithm,
    setup: LabSetup,
    network: ConsensusNetwork,
    gamma: int,
    omega: float | None,
) -> SteadyStatePrediction | None:
    try:
        return steady_state(
            algorithm, setup.plant, setup.sensors, network, gamma, omega=omega
        )
    except (ValueError, RuntimeError) as e:
        logger.warning(
            "No steady-state theory for %s at gamma=%d: %s", algorithm, gamma, e
        )
        return None


def _run_cell(
    executor: Executor,
    config: ExperimentConfig,
    setup: LabSetup,
    chunks: Sequence[Sequence[Trajectory]],
    algorithm: Algorithm,
    gamma: int,
    eta: float,
) -> CellResult:
    start = time.perf_counter()
    logger.info("Running %s at gamma=%d, eta=%.2f", algorithm, gamma, eta)
    network = setup.network_at(eta)
    window = config.window()
    options = FilterOptions(
        omega=config.omega,
        rel_tol=config.rel_tol,
        freeze_qws=config.freeze_qws,
        qws_seed=config.base_seed,
        naive_mode=config.naive_mode,
    )
    try:
        futures = [
            executor.submit(
                _run_chunk, algorithm, chunk, network, gamma, setup, options, window
            )
            for chunk in chunks
        ]
        stats = [future.result() for future in futures]
    except (ValueError, RuntimeError) as e:
        logger.warning("Cell %s gamma=%d eta=%.2f failed: %s", algorithm, gamma, eta, e)
        return CellResult(
            algorithm=algorithm,
            gamma=gamma,
            eta=eta,
            status=CellStatus.FAILED,
            error=f"{type(e).__name__}: {e}",
            elapsed=time.perf_counter() - start,
        )
    trials = sum(len(chunk) for chunk in chunks)
    samples = trials * (window[1] - window[0] + 1)
    mse = sum(s.squared_error for s in stats) / trials
    trial_mmse = np.concatenate([s.trial_mmse for s in stats])
    empirical = sum(s.error_outer for s in stats) / samples
    reported = sum(s.reported for s in stats) / samples
    se = float(trial_mmse.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    prediction = _theory(algorithm, setup, network, gamma, config.omega)
    theory_actual: list[float] | None = None
    theory_estimated: list[float] | None = None
    theory_margin: list[float] | None = None
    theory_mmse: float | None = None
    if prediction is not None:
        actual = posterior_theory_trace(prediction)
        theory_actual = actual.tolist()
        theory_estimated = posterior_theory_trace(prediction, actual=False).tolist()
        theory_margin = prediction.posterior_consistency_margin.tolist()
        theory_mmse = float(actual.mean())
    return CellResult(
        algorithm=algorithm,
        gamma=gamma,
        eta=eta,
        mmse=float(trial_mmse.mean()),
        mmse_se=se,
        mse=mse.tolist(),
        theory_actual=theory_actual,
        theory_estimated=theory_estimated,
        theory_mmse=theory_mmse,
        empirical_margin=min_eig(reported - empirical).tolist(),
        theory_margin=theory_margin,
        elapsed=time.perf_counter() - start,
    )


def _chunked(seeds: Sequence[int], size: int) -> list[Sequence[int]]:
    return [seeds[i : i + size] for i in range(0, len(seeds), size)]


def run_experiment(
    config: ExperimentConfig,
    *,
    trials: int | None = None,
) -> ExperimentReport:
    """
    Run every (eta, gamma, algorithm) cell of ``config``.

    ``trials`` overrides the config's trial count. A cell whose filter fails is
    marked failed and the sweep carries on.
    """
    trials = config.trials if trials is None else trials
    if trials < 1:
        msg = "trials must be at least 1"
        raise ValueError(msg)
    started_at = datetime.now(UTC)
    start = time.perf_counter()
    setup = build_setup(config)
    horizon = config.plant.horizon_steps
    seeds = [config.base_seed + t for t in range(trials)]
    threads = settings.dkf_threads
    cells: list[CellResult] = []
    with ThreadPoolExecutor(max_workers=threads) as executor:
        chunks = list(
            executor.map(
                lambda chunk: simulate_batch(
                    setup.plant, setup.sensors, horizon, chunk
                ),
                _chunked(seeds, settings.dkf_chunk_size),
            )
        )
        for eta, gamma, algorithm in product(
            config.etas, config.gammas, config.algorithms
        ):
            cells.append(
                _run_cell(executor, config, setup, chunks, algorithm, gamma, eta)
            )
    spectral = setup.network.spectral_data()
    elapsed = time.perf_counter() - start
    logger.info("Experiment %s finished in %.1fs", config.name, elapsed)
    return ExperimentReport(
        experiment=config.name,
        config=config,
        base_seed=config.base_seed,
        trials=trials,
        window=config.window(),
        network=NetworkSummary(
            kind=config.network.kind,
            node_count=setup.network.node_count,
            edge_count=len(setup.network.edges),
            lambda2=spectral.lambda2,
            diameter=spectral.diameter,
        ),
        cells=cells,
        started_at=started_at,
        elapsed=elapsed,
        threads=threads,
    )


def relative_degradation(report: ExperimentReport) -> list[DegradationRow]:
    """
    Relative MMSE change of every cell against the smallest eta in the report.

    Cells without a completed baseline at the same algorithm and gamma are
    skipped.
    """
    done = [c for c in report.cells if c.status is CellStatus.OK and c.mmse is not None]
    if not done:
        return []
    base_eta = min(c.eta for c in done)
    baseline = {(c.algorithm, c.gamma): c.mmse for c in done if c.eta == base_eta}
    rows = []
    for cell in done:
        base = baseline.get((cell.algorithm, cell.gamma))
        if base is None or cell.mmse is None:
            continue
        rows.append(
            DegradationRow(
                algorithm=cell.algorithm,
                gamma=cell.gamma,
                eta=cell.eta,
                mmse=cell.mmse,
                relative_percent=100.0 * (cell.mmse - base) / base,
            )
        )
    return rows


def qws_benchmark(
    config: ExperimentConfig,
    *,
    gamma: int | None = None,
    replicas: int = 1000,
    steps: int | None = None,
) -> QwsBenchmarkReport:
    """
    Run both QWS estimators against the exact fused covariance.

    The direct method runs once and is checked against both error bounds at
    every step; the stochastic method runs ``replicas`` independent times and
    its mean squared error is compared with the Wishart prediction.
    """
    gamma = config.gammas[0] if gamma is None else gamma
    steps = min(config.plant.horizon_steps, 50) if steps is None else steps
    if replicas < 1 or steps < 1:
        msg = "replicas and steps must be at least 1"
        raise ValueError(msg)
    setup = build_setup(config)
    network = setup.network_at(config.etas[0])
    X = setup.sensors.info_matrices
    exact = exact_qws_oracle(network, gamma, X)
    exact_pinv = pinv_sym(exact, config.rel_tol)
    exact_norm = np.linalg.norm(exact, ord=2, axis=(-2, -1))
    dim = X.shape[-1]
    factors = np.stack([f.Y for f in factor_all(X)])
    direct = direct_init(
        network, factors, config.base_seed, naive_mode=config.naive_mode
    )
    stochastic = stochastic_init(factors, replicas)
    rng = np.random.default_rng([config.base_seed, 2])
    rows: list[QwsDiagnosticRow] = []
    violations = 0
    predicted = np.full(network.node_count, np.nan)
    empirical = np.zeros(network.node_count)
    for step in range(1, steps + 1):
        direct, U = direct_round(direct, network, gamma, config.rel_tol)
        stochastic = stochastic_round(stochastic, network, gamma, rng)
        bound = direct_error_bound(network, gamma, direct.count)
        diff = U - exact
        relative = np.divide(
            np.linalg.norm(diff, ord=2, axis=(-2, -1)),
            exact_norm,
            out=np.zeros_like(exact_norm),
            where=exact_norm > 0.0,
        )
        inverse = np.linalg.norm(
            pinv_sym(U, config.rel_tol) - exact_pinv, axis=(-2, -1)
        )
        empirical = np.mean(
            np.sum((stochastic.average - exact) ** 2, axis=(-2, -1)), axis=0
        )
        predicted = np.array(
            [
                stochastic_moment_predictions(x, step, config.rel_tol).mse_forward
                if step > dim + 3
                else np.nan
                for x in exact
            ]
        )
        for i in range(network.node_count):
            limit = bound.exact[i]
            if bound.spectral is not None:
                limit = min(limit, bound.spectral)
            if relative[i] > limit + BOUND_SLACK:
                violations += 1
            rows.append(
                QwsDiagnosticRow(
                    step=step,
                    node=i + 1,
                    consensus_count=direct.count,
                    direct_error=float(np.linalg.norm(diff[i])),
                    direct_inverse_error=float(inverse[i]),
                    direct_relative_error=float(relative[i]),
                    bound_exact=float(bound.exact[i]),
                    bound_spectral=bound.spectral,
                    stochastic_mse=float(empirical[i]),
                    stochastic_predicted=(
                        None if np.isnan(predicted[i]) else float(predicted[i])
                    ),
                )
            )
    ratio = None
    if not np.any(np.isnan(predicted)):
        ratio = float(empirical.mean() / predicted.mean())
    if violations:
        logger.warning("Direct method exceeded its error bound %d times", violations)
    return QwsBenchmarkReport(
        experiment=config.name,
        gamma=gamma,
        steps=steps,
        replicas=replicas,
        node_count=network.node_count,
        bound_start=math.ceil(direct_bound_start(network, gamma) / gamma),
        rows=rows,
        bound_violations=violations,
        bound_satisfied=violations == 0,
        prediction_ratio=ratio,
        prediction_agreement=(
            None if ratio is None else abs(ratio - 1.0) <= PREDICTION_TOLERANCE
        ),
    )


def steady_state_report(config: ExperimentConfig) -> SteadyStateReport:
    """
    Predict steady prior covariances for every algorithm and gamma.

    Each row compares a node's reported and actual covariances and measures
    the distance to the centralized filter. The slope of the log gap against
    gamma estimates the exponential convergence rate.
    """
    setup = build_setup(config)
    eta = config.etas[0]
    network = setup.network_at(eta)
    P_ckf = steady_ckf(setup.plant, setup.sensors)
    rows: list[SteadyStateRow] = []
    failures: list[SteadyStateFailure] = []
    gaps: dict[Algorithm, list[tuple[int, float]]] = {}
    for gamma, algorithm in product(config.gammas, config.algorithms):
        try:
            prediction = steady_state(
                algorithm,
                setup.plant,
                setup.sensors,
                network,
                gamma,
                omega=config.omega,
            )
        except (ValueError, RuntimeError) as e:
            logger.warning(
                "Steady state of %s at gamma=%d failed: %s", algorithm, gamma, e
            )
            failures.append(
                SteadyStateFailure(
                    algorithm=algorithm, gamma=gamma, error=f"{type(e).__name__}: {e}"
                )
            )
            continue
        P = prediction.prior_estimated
        gap = np.linalg.norm(P - P_ckf, ord=2, axis=(-2, -1))
        margin = prediction.consistency_margin
        estimated = np.trace(P, axis1=-2, axis2=-1)
        actual = np.trace(prediction.prior_actual, axis1=-2, axis2=-1)
        gaps.setdefault(algorithm, []).append((gamma, float(gap.mean())))
        rows.extend(
            SteadyStateRow(
                algorithm=algorithm,
                gamma=gamma,
                node=i + 1,
                trace_estimated=float(estimated[i]),
                trace_actual=float(actual[i]),
                margin=float(margin[i]),
                gap_to_ckf=float(gap[i]),
            )
            for i in range(network.node_count)
        )
    return SteadyStateReport(
        experiment=config.name,
        eta=eta,
        trace_ckf=float(np.trace(P_ckf)),
        rows=rows,
        failures=failures,
        log_gap_slope=_log_gap_slopes(gaps),
    )


def _log_gap_slopes(
    gaps: dict[Algorithm, list[tuple[int, float]]],
) -> dict[Algorithm, float]:
    slopes = {}
    for algorithm, points in gaps.items():
        usable = [(g, v) for g, v in points if v > 0.0]
        if len({g for g, _ in usable}) < 2:
            continue
        gammas, values = zip(*usable, strict=True)
        slopes[algorithm] = float(np.polyfit(gammas, np.log(values), 1)[0])
    return slopes


def _mse_frame(report: ExperimentReport) -> pd.DataFrame:
    frames = []
    for cell in report.cells:
        if cell.status is not CellStatus.OK or not cell.mse:
            continue
        mse = np.asarray(cell.mse)
        steps, nodes = mse.shape
        theory = (
            np.full(nodes, np.nan)
            if cell.theory_actual is None
            else np.asarray(cell.theory_actual)
        )
        frames.append(
            pd.DataFrame(
                {
                    "experiment": report.experiment,
                    "algorithm": cell.algorithm.value,
                    "gamma": cell.gamma,
                    "eta": cell.eta,
                    "node": np.tile(np.arange(1, nodes + 1), steps),
                    "k": np.repeat(np.arange(1, steps + 1), nodes),
                    "mse": mse.reshape(-1),
                    "theory": np.tile(theory, steps),
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=MSE_COLUMNS)
    return pd.concat(frames, ignore_index=True)[MSE_COLUMNS]


def write_qws_diagnostics(report: QwsBenchmarkReport, out_dir: Path) -> Path:
    """Write the per-step QWS diagnostics as CSV."""
    path = out_dir / QWS_DIAGNOSTICS_FILE
    frame = pd.DataFrame(
        [row.model_dump() for row in report.rows], columns=QWS_COLUMNS
    )
    frame.to_csv(path, index=False)
    return path


def _write_rows(rows: Sequence[BaseModel], model: type[BaseModel], path: Path) -> None:
    frame = pd.DataFrame(
        [row.model_dump(mode="json") for row in rows],
        columns=list(model.model_fields),
    )
    frame.to_csv(path, index=False)


def _write_json(report: AnyReport, path: Path) -> Path:
    path.write_text(report.model_dump_json(indent=2))
    return path


def emit_report(
    report: AnyReport,
    out_dir: Path,
    formats: Iterable[ReportFormat] = REPORT_FORMATS,
) -> list[Path]:
    """
    Write ``report`` under ``out_dir`` and return the files written.

    Experiment reports produce a long-format MSE table, plus a relative
    degradation table when they sweep eta. Columns are in a fixed order.
    """
    formats = set(formats)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    stem = report.experiment
    match report:
        case ExperimentReport():
            if "json" in formats:
                written.append(_write_json(report, out_dir / f"{stem}.json"))
            if "csv" in formats:
                path = out_dir / f"{stem}.csv"
                _mse_frame(report).to_csv(path, index=False)
                written.append(path)
                if len({c.eta for c in report.cells}) > 1:
                    path = out_dir / f"{stem}_degradation.csv"
                    _write_rows(relative_degradation(report), DegradationRow, path)
                    written.append(path)
        case QwsBenchmarkReport():
            if "json" in formats:
                written.append(_write_json(report, out_dir / f"{stem}_qws.json"))
            if "csv" in formats:
                written.append(write_qws_diagnostics(report, out_dir))
        case SteadyStateReport():
            if "json" in formats:
                path = out_dir / f"{stem}_steady_state.json"
                written.append(_write_json(report, path))
            if "csv" in formats:
                path = out_dir / f"{stem}_steady_state.csv"
                _write_rows(report.rows, SteadyStateRow, path)
                written.append(path)
    for path in written:
        logger.info("Wrote %s", path)
    return written
