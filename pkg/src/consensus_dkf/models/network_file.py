"""Models for network specs and the JSON graph file format."""

from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BaseModel, Field, PlainValidator, model_validator


def validate_weights(data: Any) -> Literal["metropolis"] | list[list[float]]:
    """Accept the literal ``"metropolis"`` or a square matrix of floats."""
    if data == "metropolis":
        return "metropolis"
    weights = np.asarray(data, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
        msg = "weights must be 'metropolis' or a square matrix"
        raise ValueError(msg)
    return weights.tolist()


WeightsField = Annotated[
    Literal["metropolis"] | list[list[float]], PlainValidator(validate_weights)
]


class NetworkFile(BaseModel):
    """A network as stored on disk. Node indices are 1-based."""

    n: int = Field(ge=1)
    edges: list[tuple[int, int]] = []
    weights: WeightsField = "metropolis"
    eta: float = Field(default=0.0, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def check_weight_shape(self) -> "NetworkFile":
        """Explicit weights must match the node count."""
        if self.weights != "metropolis" and len(self.weights) != self.n:
            msg = f"explicit weights must be {self.n}x{self.n}"
            raise ValueError(msg)
        return self


class NetworkSpec(BaseModel):
    """How an experiment builds its network."""

    kind: Literal["geometric", "line", "circle", "small_world", "complete", "file"] = (
        "geometric"
    )
    node_count: int = Field(default=20, ge=2)
    side_length: float = Field(default=300.0, gt=0.0)
    comm_radius: float = Field(default=100.0, gt=0.0)
    seed: int = 0
    path: Path | None = None
