"""Configuration for the consensus DKF lab."""

import os
from pathlib import Path
from typing import Any

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Lab settings, read from the environment or a ``.env`` file."""

    dkf_threads: int = os.cpu_count() or 1
    """The maximum number of worker threads used for Monte Carlo trials."""

    dkf_chunk_size: int = 50
    """How many trials one worker filters as a single batch."""

    dkf_output_dir: Path = Path("out")
    """Where reports go when neither the command line nor the config says."""

    dkf_log_level: str = "INFO"
    """The root log level used by the command line."""

    dkf_router_prefix: str = ""
    """The prefix under which to include the HTTP router."""

    dkf_api_max_trials: int = 200
    """The trial cap for experiments started over HTTP."""

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")

    def model_post_init(self, __context: Any, /) -> None:
        """Clamp the worker settings to usable values."""
        self.dkf_threads = max(1, self.dkf_threads)
        self.dkf_chunk_size = max(1, self.dkf_chunk_size)
        self.dkf_log_level = self.dkf_log_level.upper()


settings = Settings()
