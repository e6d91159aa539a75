"""Decoupled similarity between visual tokens and text tokens.

All inner products are taken between L2-normalized rows, so every
similarity is a cosine.  The weighting scheme follows token-flow style
alignment: each token pair's similarity is reweighted by how well each side
matches the other modality's representative token (CLS for vision, EOS for
text), normalized with a temperature-scaled softmax.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import as_matrix, as_vector, cosine_sim_matrix, mean_over_axis

DEFAULT_LAMBDA = 0.1


@dataclass(frozen=True)
class TextEmbedding:
    """Non-padded text token embeddings and the position of the EOS token."""

    tokens: np.ndarray
    eos_index: int = -1

    def __post_init__(self):
        tokens = as_matrix(self.tokens, "text tokens")
        if tokens.shape[0] < 1:
            raise ShapeError("text embedding needs at least one token")
        eos = self.eos_index
        if eos < 0:
            eos += tokens.shape[0]
        if not 0 <= eos < tokens.shape[0]:
            raise IndexError(f"eos_index {self.eos_index} out of range for {tokens.shape[0]} tokens")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "eos_index", eos)

    @classmethod
    def from_padded(cls, tokens, valid, eos_index: int | None = None) -> "TextEmbedding":
        """Drop padded rows.

        ``valid`` is a boolean mask over rows (True = real token).  The EOS
        defaults to the last real token; an explicit ``eos_index`` refers to
        the padded row numbering.
        """
        tokens = as_matrix(tokens, "text tokens")
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != (tokens.shape[0],):
            raise ShapeError(f"pad mask {valid.shape} does not match {tokens.shape[0]} rows")
        keep = np.flatnonzero(valid)
        if keep.size == 0:
            raise ShapeError("every text token is padded")
        if eos_index is None:
            eos = keep.size - 1
        else:
            hits = np.flatnonzero(keep == eos_index)
            if hits.size == 0:
                raise IndexError(f"eos_index {eos_index} is padded or out of range")
            eos = int(hits[0])
        return cls(tokens[keep], eos)

    @property
    def eos(self) -> np.ndarray:
        return self.tokens[self.eos_index]

    @property
    def length(self) -> int:
        return self.tokens.shape[0]


@dataclass(frozen=True)
class AlignmentResult:
    m_s: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    m_v: np.ndarray
    m_t: np.ndarray
    m_vt: np.ndarray
    a_t: np.ndarray
    lam: float


def token_similarity(a_d, s_q: TextEmbedding) -> np.ndarray:
    """Cosine similarity of every visual row against every text row, ``(d1, d2)``."""
    return cosine_sim_matrix(a_d, s_q.tokens)


def representative_weights(a_d, s_q: TextEmbedding, cls_row: int | None = 0):
    """Importance of each token relative to the other modality's summary token.

    ``alpha[i]`` is the cosine of visual row ``i`` with the text EOS embedding;
    ``beta[j]`` is the cosine of text row ``j`` with the visual representative,
    which is row ``cls_row`` of ``a_d``.  ``cls_row=None`` (encoders without a
    CLS token) uses the mean visual row instead.
    """
    a_d = as_matrix(a_d, "a_d")
    if cls_row is None:
        v_s = a_d.mean(axis=0)
    else:
        if not -a_d.shape[0] <= cls_row < a_d.shape[0]:
            raise IndexError(f"cls_row {cls_row} out of range for {a_d.shape[0]} visual tokens")
        v_s = a_d[cls_row]
    alpha = cosine_sim_matrix(a_d, s_q.eos[None, :])[:, 0]
    beta = cosine_sim_matrix(s_q.tokens, v_s[None, :])[:, 0]
    return alpha, beta


def _softmax(z: np.ndarray, axis: int) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def fine_grained_alignment(m_s, alpha, beta, lam: float = DEFAULT_LAMBDA):
    """Weighted token-pair alignment matrices ``(m_v, m_t)``.

    ``m_v[i, j] = alpha_i * softmax_j(lam * beta_j * m_ij) / d1`` and
    ``m_t[i, j] = beta_j * softmax_i(lam * alpha_i * m_ij) / d2``.
    Consequently each row of ``m_v`` sums to ``alpha_i / d1`` and each column
    of ``m_t`` to ``beta_j / d2``.
    """
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    m_s = as_matrix(m_s, "m_s")
    alpha = as_vector(alpha, "alpha")
    beta = as_vector(beta, "beta")
    d1, d2 = m_s.shape
    if alpha.shape[0] != d1 or beta.shape[0] != d2:
        raise ShapeError(
            f"m_s {m_s.shape} incompatible with alpha {alpha.shape} and beta {beta.shape}"
        )
    m_v = alpha[:, None] * _softmax(lam * beta[None, :] * m_s, axis=1) / d1
    m_t = beta[None, :] * _softmax(lam * alpha[:, None] * m_s, axis=0) / d2
    return m_v, m_t


def task_attention_map(m_s, m_v, m_t) -> np.ndarray:
    """Mean over text positions of ``(m_v + m_t) * m_s`` (elementwise)."""
    m_s, m_v, m_t = (as_matrix(x, n) for x, n in ((m_s, "m_s"), (m_v, "m_v"), (m_t, "m_t")))
    if not (m_s.shape == m_v.shape == m_t.shape):
        raise ShapeError(f"shape mismatch: m_s {m_s.shape}, m_v {m_v.shape}, m_t {m_t.shape}")
    return mean_over_axis((m_v + m_t) * m_s, "cols")


def vanilla_similarity(hidden, s_q: TextEmbedding) -> np.ndarray:
    """Baseline: mean cosine of each hidden-state row to all text tokens."""
    return mean_over_axis(cosine_sim_matrix(hidden, s_q.tokens), "cols")


def decoupled_similarity(a_d, s_q: TextEmbedding, cls_row: int | None = 0,
                         lam: float = DEFAULT_LAMBDA) -> AlignmentResult:
    """Full chain from the attention component to the task-relevance map.

    ``a_t`` covers every row of ``a_d``, CLS included; callers drop the CLS
    entry before ranking patches.
    """
    a_d = as_matrix(a_d, "a_d")
    if a_d.shape[1] != s_q.tokens.shape[1]:
        raise ShapeError(
            f"visual width {a_d.shape[1]} does not match text width {s_q.tokens.shape[1]}"
        )
    m_s = token_similarity(a_d, s_q)
    alpha, beta = representative_weights(a_d, s_q, cls_row)
    m_v, m_t = fine_grained_alignment(m_s, alpha, beta, lam)
    m_vt = (m_v + m_t) * m_s
    a_t = task_attention_map(m_s, m_v, m_t)
    return AlignmentResult(m_s, alpha, beta, m_v, m_t, m_vt, a_t, float(lam))
