import pytest
from pydantic import ValidationError

from consensus_dkf.models import NetworkFile, NetworkSpec


def test_metropolis_default() -> None:
    """Weights default to Metropolis."""
    data = NetworkFile.model_validate({"n": 3, "edges": [[1, 2], [2, 3]]})
    assert data.weights == "metropolis"
    assert data.edges == [(1, 2), (2, 3)]
    assert data.eta == 0.0


def test_explicit_weights() -> None:
    """Explicit weights are kept as a float matrix."""
    data = NetworkFile(n=2, edges=[(1, 2)], weights=[[0.5, 0.5], [0.5, 0.5]])
    assert data.weights == [[0.5, 0.5], [0.5, 0.5]]


@pytest.mark.parametrize(
    "payload",
    [
        {"n": 0},
        {"n": 2, "weights": "uniform"},
        {"n": 2, "weights": [[1.0, 0.0]]},
        {"n": 3, "weights": [[1.0, 0.0], [0.0, 1.0]]},
        {"n": 2, "eta": 1.0},
    ],
)
def test_invalid(payload: dict[str, object]) -> None:
    """Malformed graph files are rejected."""
    with pytest.raises(ValidationError):
        NetworkFile.model_validate(payload)


def test_network_spec() -> None:
    """Specs default to a geometric network and validate their kind."""
    spec = NetworkSpec()
    assert spec.kind == "geometric"
    assert spec.node_count == 20
    with pytest.raises(ValidationError):
        NetworkSpec.model_validate({"kind": "torus"})
    with pytest.raises(ValidationError):
        NetworkSpec(node_count=1)
