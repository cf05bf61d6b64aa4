"""The seven consensus filters and the batch runner."""

from .base import (
    Algorithm,
    FusionRound,
    NodeFilterState,
    information_update,
    initial_state,
    predict,
    prior_information,
)
from .ckf import ckf_step
from .consensus import ci_step, cm_step, hcmci_step
from .modified import draw_theta, init_qws, modified_cm_step, modified_ci_step
from .runner import FilterHistory, FilterOptions, run_filter, trial_generators

__all__ = [
    "Algorithm",
    "FilterHistory",
    "FilterOptions",
    "FusionRound",
    "NodeFilterState",
    "ci_step",
    "ckf_step",
    "cm_step",
    "draw_theta",
    "hcmci_step",
    "information_update",
    "init_qws",
    "initial_state",
    "modified_ci_step",
    "modified_cm_step",
    "predict",
    "prior_information",
    "run_filter",
    "trial_generators",
]
