"""The ``dkf`` command line."""

import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import BaseModel, ConfigDict
from pydantic_settings import (
    BaseSettings,
    CliApp,
    CliSubCommand,
    SettingsConfigDict,
    SettingsError,
)

from .config import settings
from .harness import (
    emit_report,
    load_config,
    qws_benchmark,
    restrict_sweep,
    run_experiment,
    steady_state_report,
)
from .models import ExperimentConfig

logger = logging.getLogger(__name__)

DEFAULT_REPLICAS = 1000


class _ConfigCommand(BaseModel):
    model_config = ConfigDict(use_attribute_docstrings=True)

    config: Path
    """The experiment config, as JSON or TOML."""

    trials: int | None = None
    """Override the config's trial count."""

    out: Path | None = None
    """Where to write the report files."""

    def load(self) -> ExperimentConfig:
        """Read the config named on the command line."""
        return load_config(self.config)

    def out_dir(self, config: ExperimentConfig) -> Path:
        """Return the output directory, falling back to config then settings."""
        return self.out or config.output_dir or settings.dkf_output_dir


class RunCommand(_ConfigCommand):
    """Run every algorithm, gamma and eta in the config."""

    def cli_cmd(self) -> None:
        """Run the experiment and write its report."""
        config = self.load()
        report = run_experiment(config, trials=self.trials)
        emit_report(report, self.out_dir(config))


class SweepGammaCommand(_ConfigCommand):
    """Sweep gamma at the first eta of the config."""

    def cli_cmd(self) -> None:
        """Run the gamma sweep and write its report."""
        config = restrict_sweep(self.load(), "gamma")
        report = run_experiment(config, trials=self.trials)
        emit_report(report, self.out_dir(config))


class SweepEtaCommand(_ConfigCommand):
    """Sweep eta at the first gamma of the config."""

    def cli_cmd(self) -> None:
        """Run the eta sweep and write its report with the degradation table."""
        config = restrict_sweep(self.load(), "eta")
        report = run_experiment(config, trials=self.trials)
        emit_report(report, self.out_dir(config))


class SteadyStateCommand(_ConfigCommand):
    """Predict steady covariances for every algorithm and gamma."""

    def cli_cmd(self) -> None:
        """Solve the steady-state equations and write the table."""
        config = self.load()
        emit_report(steady_state_report(config), self.out_dir(config))


class QwsBenchCommand(_ConfigCommand):
    """Benchmark the QWS estimators; ``--trials`` sets the replica count."""

    steps: int | None = None
    """Filter steps to run; defaults to the horizon, capped at 50."""

    def cli_cmd(self) -> None:
        """Run the benchmark and write the diagnostics."""
        config = self.load()
        report = qws_benchmark(
            config, replicas=self.trials or DEFAULT_REPLICAS, steps=self.steps
        )
        emit_report(report, self.out_dir(config))


class DkfCli(BaseSettings):
    """Distributed Kalman filter simulation lab."""

    model_config = SettingsConfigDict(
        cli_prog_name="dkf",
        cli_kebab_case=True,
        cli_exit_on_error=False,
        cli_use_class_docs_for_groups=True,
        use_attribute_docstrings=True,
    )

    run: CliSubCommand[RunCommand]
    sweep_gamma: CliSubCommand[SweepGammaCommand]
    sweep_eta: CliSubCommand[SweepEtaCommand]
    steady_state: CliSubCommand[SteadyStateCommand]
    qws_bench: CliSubCommand[QwsBenchCommand]

    def cli_cmd(self) -> None:
        """Dispatch to the chosen subcommand."""
        CliApp.run_subcommand(self)


def error_json(error: BaseException) -> str:
    """Render an error as the JSON line written to stderr."""
    return json.dumps({"error": type(error).__name__, "message": str(error)})


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return the process exit code."""
    logging.basicConfig(
        level=settings.dkf_log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        CliApp.run(DkfCli, cli_args=None if argv is None else list(argv))
    except (SettingsError, ValueError, RuntimeError, OSError) as e:
        logger.debug("Command failed", exc_info=e)
        sys.stderr.write(error_json(e) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
