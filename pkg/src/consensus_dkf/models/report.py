"""Report models written by the harness and returned by the HTTP API."""

from datetime import datetime
from enum import StrEnum
from typing import Literal

from pydantic import BaseModel, Field

from .experiment import Algorithm, ExperimentConfig
from .network_file import NetworkFile

SCHEMA_VERSION = 1


class CellStatus(StrEnum):
    """Outcome of one (algorithm, gamma, eta) cell."""

    OK = "ok"
    FAILED = "failed"


class NetworkSummary(BaseModel):
    """What the report records about the network it ran on."""

    kind: str
    node_count: int
    edge_count: int
    lambda2: float
    diameter: int | None


class CellResult(BaseModel):
    """Monte Carlo and theory results for one cell of the sweep."""

    algorithm: Algorithm
    gamma: int
    eta: float
    status: CellStatus = CellStatus.OK
    error: str | None = None
    mmse: float | None = None
    """Mean of ``MSE_{i,k}`` over the steady window and the nodes."""
    mmse_se: float | None = None
    """Standard error of ``mmse`` across trials."""
    mse: list[list[float]] = []
    """``MSE_{i,k}`` indexed ``[k - 1][i]``."""
    theory_actual: list[float] | None = None
    """Per-node trace of the predicted posterior error covariance."""
    theory_estimated: list[float] | None = None
    """Per-node trace of the predicted reported posterior covariance."""
    theory_mmse: float | None = None
    empirical_margin: list[float] | None = None
    """Per-node ``min eig(P_reported - P_empirical)`` over the steady window."""
    theory_margin: list[float] | None = None
    elapsed: float = 0.0


class ExperimentReport(BaseModel):
    """A complete experiment, with the config echoed for reproducibility."""

    schema_version: Literal[1] = SCHEMA_VERSION
    experiment: str
    config: ExperimentConfig
    base_seed: int
    trials: int
    window: tuple[int, int]
    network: NetworkSummary
    cells: list[CellResult] = []
    started_at: datetime
    elapsed: float = 0.0
    threads: int = 1

    def cell(self, algorithm: Algorithm, gamma: int, eta: float) -> CellResult:
        """Look up one cell."""
        for cell in self.cells:
            if (cell.algorithm, cell.gamma, cell.eta) == (algorithm, gamma, eta):
                return cell
        msg = f"no cell for {algorithm} at gamma={gamma}, eta={eta}"
        raise KeyError(msg)


class DegradationRow(BaseModel):
    """Relative MMSE change against the unblended network."""

    algorithm: Algorithm
    gamma: int
    eta: float
    mmse: float
    relative_percent: float


class QwsDiagnosticRow(BaseModel):
    """One node at one filter step of the QWS benchmark."""

    step: int
    node: int
    """1-based node index."""
    consensus_count: int
    direct_error: float
    """``||U - R_tilde||_F``."""
    direct_inverse_error: float
    """``||U^+ - R_tilde^+||_F``."""
    direct_relative_error: float
    """``||U - R_tilde||_2 / ||R_tilde||_2``."""
    bound_exact: float
    bound_spectral: float | None
    stochastic_mse: float
    """Mean of ``||Upsilon - R_tilde||_F^2`` over the replicas."""
    stochastic_predicted: float | None
    """The Wishart prediction for ``stochastic_mse``, when ``k > n + 3``."""


class QwsBenchmarkReport(BaseModel):
    """Direct and stochastic QWS estimators against the exact fused covariance."""

    schema_version: Literal[1] = SCHEMA_VERSION
    experiment: str
    gamma: int
    steps: int
    replicas: int
    node_count: int
    bound_start: int
    """First filter step whose consensus count admits the spectral bound."""
    rows: list[QwsDiagnosticRow] = []
    bound_violations: int = 0
    bound_satisfied: bool = True
    prediction_ratio: float | None = None
    """Network mean empirical over predicted stochastic MSE at the last step."""
    prediction_agreement: bool | None = None


class SteadyStateRow(BaseModel):
    """Steady prior covariances of one node under one algorithm."""

    algorithm: Algorithm
    gamma: int
    node: int
    """1-based node index."""
    trace_estimated: float
    trace_actual: float
    margin: float
    """``min eig(P_i - P_tilde_i)``; negative means inconsistent."""
    gap_to_ckf: float
    """``||P_i - P^C||_2``."""


class SteadyStateFailure(BaseModel):
    """A prediction the solvers could not produce."""

    algorithm: Algorithm
    gamma: int
    error: str


class SteadyStateReport(BaseModel):
    """Theory-only sweep over gamma for one network."""

    schema_version: Literal[1] = SCHEMA_VERSION
    experiment: str
    eta: float
    trace_ckf: float
    rows: list[SteadyStateRow] = []
    failures: list[SteadyStateFailure] = []
    log_gap_slope: dict[Algorithm, float] = Field(default_factory=dict)
    """Least squares slope of ``log mean_i ||P_i - P^C||_2`` against gamma."""


class TopologyResponse(BaseModel):
    """A generated topology with its spectral summary."""

    network: NetworkFile
    lambda2: float
    diameter: int | None
    connected: bool
