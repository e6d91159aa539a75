"""Dense float64 kernels shared by the encoder, alignment and pruning code.

Matrices are 2-D ``numpy.ndarray`` objects and vectors are 1-D ones.  Every
kernel converts its inputs to float64 and returns a fresh array.  Index sets
are 1-D integer arrays, strictly increasing.
"""
from __future__ import annotations

from typing import Literal

import numpy as np

from .errors import BudgetError, ShapeError

__all__ = [
    "as_matrix",
    "as_vector",
    "matmul",
    "row_softmax",
    "layer_norm",
    "cosine_sim_matrix",
    "mean_over_axis",
    "top_k_indices",
]


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def as_vector(v, name: str = "vector") -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def row_softmax(m) -> np.ndarray:
    """Softmax along each row, with the row max subtracted first."""
    m = as_matrix(m)
    if m.size == 0:
        raise ShapeError(f"softmax of empty matrix {m.shape}")
    z = m - m.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def layer_norm(m, gamma, beta, eps: float = 1e-5) -> np.ndarray:
    """Per-row standardization (population variance) followed by ``gamma * x + beta``."""
    m = as_matrix(m)
    gamma = as_vector(gamma, "gamma")
    beta = as_vector(beta, "beta")
    if not (gamma.shape[0] == beta.shape[0] == m.shape[1]):
        raise ShapeError(
            f"layer_norm: matrix {m.shape} with gamma {gamma.shape} and beta {beta.shape}"
        )
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu = m.mean(axis=1, keepdims=True)
    var = ((m - mu) ** 2).mean(axis=1, keepdims=True)
    return (m - mu) / np.sqrt(var + eps) * gamma + beta


def _unit_rows(m: np.ndarray) -> np.ndarray:
    # prescale by the row max so squaring cannot underflow or overflow
    peak = np.abs(m).max(axis=1, keepdims=True) if m.shape[1] else np.zeros((m.shape[0], 1))
    m = np.divide(m, peak, out=np.zeros_like(m), where=peak > 0)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    # zero rows stay zero, so their similarities come out as 0
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)


def cosine_sim_matrix(a, b) -> np.ndarray:
    """Pairwise cosine similarity between the rows of ``a`` and ``b``.

    Rows with zero norm have similarity 0 to everything.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"cosine similarity needs equal widths, got {a.shape} and {b.shape}")
    s = _unit_rows(a) @ _unit_rows(b).T
    return np.clip(s, -1.0, 1.0)


def mean_over_axis(m, axis: Literal["rows", "cols"]) -> np.ndarray:
    """Mean over ``"rows"`` (one value per column) or ``"cols"`` (one per row)."""
    m = as_matrix(m)
    if m.size == 0:
        raise ShapeError(f"mean of empty matrix {m.shape}")
    if axis == "rows":
        return m.mean(axis=0)
    if axis == "cols":
        return m.mean(axis=1)
    raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")


def top_k_indices(scores, k: int) -> np.ndarray:
    """Positions of the ``k`` largest scores, ascending.

    Equal scores are ranked by position, lowest first.
    """
    scores = as_vector(scores, "scores")
    if k < 0 or k > scores.shape[0]:
        raise BudgetError(f"k={k} outside [0, {scores.shape[0]}]")
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k]).astype(np.intp)
