"""Consensus-based distributed Kalman filter simulation lab."""

from .config import Settings
from .router import router

__all__ = [
    "Settings",
    "router",
]
