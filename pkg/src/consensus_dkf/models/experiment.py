"""Experiment configuration models."""

from enum import StrEnum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .network_file import NetworkSpec


class Algorithm(StrEnum):
    """The filters the lab can run."""

    CKF = "ckf"
    CM = "cm"
    CI = "ci"
    HCMCI = "hcmci"
    MCM_DIRECT = "mcm-direct"
    MCM_STOCH = "mcm-stoch"
    MCI_DIRECT = "mci-direct"
    MCI_STOCH = "mci-stoch"

    @property
    def is_modified(self) -> bool:
        """Whether the filter estimates the fused covariance online."""
        return self.value.startswith(("mcm", "mci"))

    @property
    def is_stochastic(self) -> bool:
        """Whether the filter uses the stochastic fused covariance estimate."""
        return self.value.endswith("-stoch")

    @property
    def is_ci_family(self) -> bool:
        """Whether the filter also fuses prior information."""
        return self in {Algorithm.CI, Algorithm.HCMCI} or self.value.startswith("mci")


class PlantSpec(BaseModel):
    """The target tracking plant and its sensor mix."""

    model_config = ConfigDict(populate_by_name=True)

    sampling_interval: float = Field(default=0.1, gt=0.0, alias="T")
    horizon_steps: int = Field(default=200, ge=1)
    x0_mean: list[float] = [150.0, 0.0, 150.0, 0.0]
    p0_scale: float = Field(default=100.0, gt=0.0, alias="P0_scale")
    node_types: list[int] | None = None


class ExperimentConfig(BaseModel):
    """A Monte Carlo experiment over a grid of algorithms, gammas and etas."""

    name: str = "experiment"
    network: NetworkSpec = NetworkSpec()
    plant: PlantSpec = PlantSpec()
    gammas: list[int] = Field(default=[4], min_length=1)
    etas: list[float] = Field(default=[0.0], min_length=1)
    algorithms: list[Algorithm] = list(Algorithm)
    trials: int = Field(default=1000, ge=1)
    base_seed: int = 0
    output_dir: Path | None = None
    steady_window: tuple[int, int] | None = None
    """First and last step (1-based, inclusive) averaged for MMSE."""
    omega: float | None = Field(default=None, gt=0.0)
    """HCMCI gain; the node count when unset."""
    freeze_qws: bool = False
    naive_mode: bool = False
    rel_tol: float | None = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def check_grid(self) -> "ExperimentConfig":
        """Validate the sweep values and the steady window."""
        if any(gamma < 1 for gamma in self.gammas):
            msg = "every gamma must be at least 1"
            raise ValueError(msg)
        if any(not 0.0 <= eta < 1.0 for eta in self.etas):
            msg = "every eta must lie in [0, 1)"
            raise ValueError(msg)
        if self.steady_window is not None:
            first, last = self.steady_window
            if not 1 <= first <= last <= self.plant.horizon_steps:
                msg = "steady window must lie within the horizon"
                raise ValueError(msg)
        return self

    def window(self) -> tuple[int, int]:
        """Return the steady window, defaulting to the last quarter of the horizon."""
        if self.steady_window is not None:
            return self.steady_window
        horizon = self.plant.horizon_steps
        return (horizon - max(1, horizon // 4) + 1, horizon)
