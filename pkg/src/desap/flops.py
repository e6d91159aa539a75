"""Prefill FLOPs of an LLM decoder as a function of the visual token count.

Per layer with ``n`` tokens, hidden size ``d`` and FFN width ``m``::

    4 n d^2 + 2 n^2 d + 3 n d m

All counts are Python ints, so there is no overflow at any size.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class ModelDims:
    num_layers: int
    hidden_dim: int
    ffn_dim: int

    def __post_init__(self):
        if min(self.num_layers, self.hidden_dim, self.ffn_dim) < 1:
            raise ConfigError(f"model dimensions must be positive: {self}")


# Standard 7B decoder shape used by LLaVA-1.5-7B (Vicuna-7B).
PRESETS = {
    "llava15-7b": ModelDims(num_layers=32, hidden_dim=4096, ffn_dim=11008),
}


@dataclass(frozen=True)
class FlopsReport:
    total: int
    post_pruning: int
    reduction_ratio: float
    speedup: float

    def lines(self) -> list[str]:
        return [
            f"total={self.total}",
            f"post={self.post_pruning}",
            f"total_tflops={self.total / 1e12:.2f}",
            f"post_tflops={self.post_pruning / 1e12:.2f}",
            f"reduction_ratio={self.reduction_ratio:.6f}",
            f"speedup={self.speedup:.4f}",
        ]


def get_preset(name: str) -> ModelDims:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None


def layer_flops(n: int, dims: ModelDims) -> int:
    n, d, m = int(n), dims.hidden_dim, dims.ffn_dim
    if n < 0:
        raise ValueError(f"token count must be nonnegative, got {n}")
    return 4 * n * d * d + 2 * n * n * d + 3 * n * d * m


def total_flops(schedule: Sequence[int], dims: ModelDims) -> int:
    """Sum of per-layer FLOPs; ``schedule[k]`` is the token count at layer ``k``."""
    if len(schedule) != dims.num_layers:
        raise ShapeError(f"schedule has {len(schedule)} entries for {dims.num_layers} layers")
    return sum(layer_flops(n, dims) for n in schedule)


def constant_schedule(n: int, dims: ModelDims) -> list[int]:
    return [int(n)] * dims.num_layers


def reduction_ratio(total: int, post: int) -> float:
    if total == 0:
        raise ZeroDivisionError("total FLOPs is zero")
    return 1.0 - post / total


def flops_report(dims: ModelDims, tokens: int | Sequence[int], post: int | Sequence[int]) -> FlopsReport:
    """Compare prefill cost before and after pruning.

    ``tokens`` and ``post`` are either per-layer schedules or single counts
    applied to every layer.
    """
    before = constant_schedule(tokens, dims) if isinstance(tokens, int) else list(tokens)
    after = constant_schedule(post, dims) if isinstance(post, int) else list(post)
    total = total_flops(before, dims)
    post_total = total_flops(after, dims)
    speedup = total / post_total if post_total else float("inf")
    return FlopsReport(total, post_total, reduction_ratio(total, post_total), speedup)


def alignment_overhead_flops(d1: int, d2: int, e: int) -> int:
    """FLOPs of the similarity products (2 per multiply-accumulate).

    ``2 d1 d2 e`` for the token-pair matrix plus ``2 d1 e + 2 d2 e`` for the
    two representative-token weight vectors.
    """
    if min(d1, d2, e) < 1:
        raise ValueError(f"dimensions must be positive: d1={d1}, d2={d2}, e={e}")
    return 2 * d1 * d2 * e + 2 * d1 * e + 2 * d2 * e
