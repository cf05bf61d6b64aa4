"""Pydantic models for configs, graph files and reports."""

from .experiment import Algorithm, ExperimentConfig, PlantSpec
from .network_file import NetworkFile, NetworkSpec, WeightsField
from .report import (
    SCHEMA_VERSION,
    CellResult,
    CellStatus,
    DegradationRow,
    ExperimentReport,
    NetworkSummary,
    QwsBenchmarkReport,
    QwsDiagnosticRow,
    SteadyStateFailure,
    SteadyStateReport,
    SteadyStateRow,
    TopologyResponse,
)

__all__ = [
    "SCHEMA_VERSION",
    "Algorithm",
    "CellResult",
    "CellStatus",
    "DegradationRow",
    "ExperimentConfig",
    "ExperimentReport",
    "NetworkFile",
    "NetworkSpec",
    "NetworkSummary",
    "PlantSpec",
    "QwsBenchmarkReport",
    "QwsDiagnosticRow",
    "SteadyStateFailure",
    "SteadyStateReport",
    "SteadyStateRow",
    "TopologyResponse",
    "WeightsField",
]
