"""Symmetric matrix helpers shared by the estimators and solvers."""

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import AsymmetricMatrixError

type Array = NDArray[np.float64]

SYMMETRY_TOL = 1e-10
INVERSE_FLOOR = 1e-12
RANK_TOL = 1e-8


def as_matrix(value: ArrayLike) -> Array:
    """Return ``value`` as a float array with at least two dimensions."""
    return np.atleast_2d(np.asarray(value, dtype=np.float64))


def symmetrize(m: Array) -> Array:
    """Return the symmetric part of a (stack of) square matrices."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def check_symmetric(m: Array, tol: float = SYMMETRY_TOL, name: str = "matrix") -> None:
    """Raise if ``m`` is not symmetric within ``tol`` relative to its scale."""
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    gap = float(np.max(np.abs(m - np.swapaxes(m, -1, -2)), initial=0.0))
    if gap > tol * scale:
        msg = f"{name} is not symmetric (max asymmetry {gap:.3e})"
        raise AsymmetricMatrixError(msg)


def default_rel_tol(dim: int) -> float:
    """Return the default relative eigenvalue cutoff for a ``dim``-square matrix."""
    return 1e-10 * dim


def _cutoff(eigenvalues: Array, rel_tol: float) -> Array:
    top = np.max(np.abs(eigenvalues), axis=-1, keepdims=True)
    return rel_tol * top


def psd_sqrt(m: Array) -> Array:
    """Symmetric square root of a PSD matrix, with negative eigenvalues clamped."""
    w, v = np.linalg.eigh(symmetrize(m))
    root = np.sqrt(np.clip(w, 0.0, None))
    return (v * root[..., None, :]) @ np.swapaxes(v, -1, -2)


def pinv_sym(m: Array, rel_tol: float | None = None) -> Array:
    """
    Moore-Penrose pseudoinverse of a (stack of) symmetric PSD matrices.

    Eigenvalues at or below ``rel_tol`` times the largest one are treated as zero.
    """
    if rel_tol is None:
        rel_tol = default_rel_tol(m.shape[-1])
    w, v = np.linalg.eigh(symmetrize(m))
    keep = w > _cutoff(w, rel_tol)
    inv = np.divide(1.0, w, out=np.zeros_like(w), where=keep)
    return (v * inv[..., None, :]) @ np.swapaxes(v, -1, -2)


def inv_sym(m: Array) -> Array:
    """Inverse of a (stack of) symmetric positive definite matrices."""
    w, v = np.linalg.eigh(symmetrize(m))
    w = np.maximum(w, INVERSE_FLOOR * np.max(np.abs(w), axis=-1, keepdims=True))
    return (v * (1.0 / w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def numerical_rank(m: Array, rel_tol: float | None = None) -> int:
    """Rank of a symmetric PSD matrix using the pseudoinverse cutoff."""
    if rel_tol is None:
        rel_tol = default_rel_tol(m.shape[-1])
    w = np.linalg.eigvalsh(symmetrize(m))
    top = float(np.max(np.abs(w), initial=0.0))
    if top == 0.0:
        return 0
    return int(np.count_nonzero(w > rel_tol * top))


def min_eig(m: Array) -> Array:
    """Smallest eigenvalue of each symmetric matrix in a stack."""
    return np.linalg.eigvalsh(symmetrize(m))[..., 0]


def spectral_radius(m: Array) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    return float(np.max(np.abs(np.linalg.eigvals(m)), initial=0.0))


def observability_matrix(A: Array, C: Array) -> Array:
    """Stack ``C, CA, ..., CA^(n-1)``."""
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def is_observable(A: Array, C: Array, tol: float = RANK_TOL) -> bool:
    """Return whether ``(A, C)`` passes the singular value rank test."""
    s = np.linalg.svd(observability_matrix(A, C), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return False
    return int(np.count_nonzero(s > tol * s[0])) == A.shape[0]


def is_full_rank(m: Array, tol: float = RANK_TOL) -> bool:
    """Return whether a square matrix passes the singular value rank test."""
    s = np.linalg.svd(m, compute_uv=False)
    return s.size > 0 and s[0] > 0.0 and bool(s[-1] > tol * s[0])
