"""HTTP dependencies."""

from typing import Annotated

from fastapi import Depends

from .config import Settings, settings


def get_settings() -> Settings:
    """Return the process settings."""
    return settings


GetSettings = Annotated[Settings, Depends(get_settings)]
