"""Dual-source token selection and cluster merging of the discarded tokens."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alignment import DEFAULT_LAMBDA, TextEmbedding, decoupled_similarity
from .encoder import (
    EncoderTrace,
    EncoderWeights,
    cls_saliency,
    decoupled_attention,
    patch_rows,
)
from .errors import BudgetError, ShapeError
from .tensor import as_matrix, as_vector, cosine_sim_matrix, top_k_indices


@dataclass(frozen=True)
class PruneBudget:
    total_keep: int
    task_keep: int
    saliency_keep: int
    split: float = 0.5

    def __post_init__(self):
        if min(self.task_keep, self.saliency_keep) < 0:
            raise BudgetError(f"negative branch budget in {self}")
        if self.task_keep + self.saliency_keep != self.total_keep:
            raise BudgetError(
                f"task_keep + saliency_keep = {self.task_keep + self.saliency_keep}"
                f" != total_keep = {self.total_keep}"
            )


@dataclass(frozen=True)
class PruneParams:
    total_keep: int
    variant: str = "qqv"
    lam: float = DEFAULT_LAMBDA
    split: float = 0.5


@dataclass(frozen=True, eq=False)
class PruneResult:
    task_set: np.ndarray
    saliency_set: np.ndarray
    retained: np.ndarray
    assignment: dict[int, int]
    merged_tokens: np.ndarray
    # score maps over patch tokens, kept for reporting
    task_scores: np.ndarray | None = None
    saliency_scores: np.ndarray | None = None


def allocate_budget(total_keep: int, split: float, num_patches: int) -> PruneBudget:
    """Split ``total_keep`` between the task branch and the saliency branch.

    The task branch gets ``split * total_keep`` rounded half up.
    """
    if not 0.0 <= split <= 1.0:
        raise BudgetError(f"split must lie in [0, 1], got {split}")
    if total_keep < 0 or total_keep > num_patches:
        raise BudgetError(f"cannot keep {total_keep} of {num_patches} patches")
    k1 = min(total_keep, math.floor(split * total_keep + 0.5))
    return PruneBudget(total_keep, k1, total_keep - k1, split)


def dual_rank_prune(a_t, a_s, budget: PruneBudget):
    """Top ``task_keep`` tokens by ``a_t``, then top ``saliency_keep`` of the rest by ``a_s``.

    Returns ``(task_set, saliency_set)``; the two sets are disjoint.
    """
    a_t = as_vector(a_t, "a_t")
    a_s = as_vector(a_s, "a_s")
    n = a_t.shape[0]
    if a_s.shape[0] != n:
        raise ShapeError(f"score maps differ in length: {n} vs {a_s.shape[0]}")
    if budget.total_keep > n:
        raise BudgetError(f"budget {budget.total_keep} exceeds {n} tokens")
    task_set = top_k_indices(a_t, budget.task_keep)
    rest = np.setdiff1d(np.arange(n), task_set)
    saliency_set = np.sort(rest[top_k_indices(a_s[rest], budget.saliency_keep)])
    return task_set, saliency_set


def merge_tokens(tokens, retained):
    """Average every discarded token into its most cosine-similar retained token.

    Returns ``(merged, assignment)`` where ``merged`` has one row per retained
    index (ascending order) and ``assignment`` maps each discarded index to
    the retained index it was merged into.  Ties go to the lower center.
    """
    tokens = as_matrix(tokens, "tokens")
    retained = np.asarray(retained, dtype=np.intp)
    if retained.size == 0:
        raise BudgetError("merge needs at least one retained token")
    if np.any(np.diff(retained) <= 0) or retained[0] < 0 or retained[-1] >= tokens.shape[0]:
        raise BudgetError(f"retained indices must be increasing and < {tokens.shape[0]}")
    discarded = np.setdiff1d(np.arange(tokens.shape[0]), retained)
    sums = tokens[retained].copy()
    counts = np.ones(retained.size)
    assignment: dict[int, int] = {}
    if discarded.size:
        sim = cosine_sim_matrix(tokens[discarded], tokens[retained])
        nearest = np.argmax(sim, axis=1)
        np.add.at(sums, nearest, tokens[discarded])
        np.add.at(counts, nearest, 1.0)
        assignment = {int(d): int(retained[c]) for d, c in zip(discarded, nearest)}
    return sums / counts[:, None], assignment


def prune_from_scores(tokens, a_t, a_s, total_keep: int, split: float = 0.5) -> PruneResult:
    """Selection and merging given precomputed patch score maps."""
    budget = allocate_budget(total_keep, split, np.shape(tokens)[0])
    task_set, saliency_set = dual_rank_prune(a_t, a_s, budget)
    retained = np.union1d(task_set, saliency_set).astype(np.intp)
    if retained.size == 0:
        raise BudgetError("total_keep must be at least 1 to produce merged tokens")
    merged, assignment = merge_tokens(tokens, retained)
    return PruneResult(task_set, saliency_set, retained, assignment, merged,
                       np.asarray(a_t, dtype=np.float64), np.asarray(a_s, dtype=np.float64))


def prune_pipeline(trace: EncoderTrace, weights: EncoderWeights, text: TextEmbedding,
                   params: PruneParams) -> PruneResult:
    """Score patches by decoupled similarity and CLS saliency, select, merge.

    The CLS token (when present) contributes the visual representative for
    the alignment but is never kept or merged; only final-layer patch rows
    are forwarded.
    """
    a_d = decoupled_attention(weights, trace, params.variant)
    cls_row = 0 if trace.has_cls else None
    align = decoupled_similarity(a_d, text, cls_row, params.lam)
    a_t = patch_rows(trace, align.a_t)
    a_s = cls_saliency(trace)
    tokens = patch_rows(trace, trace.final)
    return prune_from_scores(tokens, a_t, a_s, params.total_keep, params.split)
