"""Toy residual-attention encoder with full intermediate recording.

Each block follows the usual CLIP-style pre-norm layout::

    h      = ln_1(x)
    x_re   = x + proj(concat_h softmax(q_h k_h^T / sqrt(d)) v_h)
    x_next = x_re + ffn(ln_2(x_re))

The trace keeps every hidden state and the per-head Q/K/V and attention
weights, which is enough to split the last block into its residual and
attention parts and to recompute attention with other operand pairings.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConsistencyError, ShapeError
from .tensor import as_matrix, layer_norm, row_softmax

VARIANTS = ("qkv", "qqv", "vvv", "kkv")
LN_EPS = 1e-5


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 2
    num_heads: int = 2
    embed_dim: int = 16
    ffn_dim: int = 32
    num_patches: int = 16
    has_cls: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("num_layers", "num_heads", "embed_dim", "ffn_dim", "num_patches"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.embed_dim % self.num_heads:
            raise ConfigError(
                f"embed_dim={self.embed_dim} is not divisible by num_heads={self.num_heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads

    @property
    def num_tokens(self) -> int:
        return self.num_patches + int(self.has_cls)


@dataclass
class LayerWeights:
    # projections act on the right: y = x @ w + b
    w_q: np.ndarray
    b_q: np.ndarray
    w_k: np.ndarray
    b_k: np.ndarray
    w_v: np.ndarray
    b_v: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray
    ln1_gamma: np.ndarray
    ln1_beta: np.ndarray
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray
    w_up: np.ndarray
    b_up: np.ndarray
    w_down: np.ndarray
    b_down: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f) for f in self.__dataclass_fields__]


@dataclass
class EncoderWeights:
    config: EncoderConfig
    layers: list[LayerWeights]

    def tobytes(self) -> bytes:
        return b"".join(a.tobytes() for layer in self.layers for a in layer.arrays())


@dataclass(frozen=True)
class EncoderTrace:
    """Recorded forward pass.

    ``hidden[0]`` is the input and ``hidden[-1]`` the final output, so there
    are ``num_layers + 1`` hidden states.  ``q``, ``k``, ``v`` and
    ``attention`` hold one ``(heads, tokens, head_dim)`` or
    ``(heads, tokens, tokens)`` array per layer.
    """

    hidden: list[np.ndarray]
    q: list[np.ndarray]
    k: list[np.ndarray]
    v: list[np.ndarray]
    attention: list[np.ndarray]
    has_cls: bool

    @property
    def final(self) -> np.ndarray:
        return self.hidden[-1]

    @property
    def num_layers(self) -> int:
        return len(self.attention)

    @property
    def num_tokens(self) -> int:
        return self.hidden[0].shape[0]


@dataclass(frozen=True)
class Decomposition:
    s_d: np.ndarray
    a_d: np.ndarray
    reconstruction: np.ndarray
    max_error: float = field(default=0.0)


def init_encoder(config: EncoderConfig) -> EncoderWeights:
    """Draw weights from ``numpy.random.default_rng(config.seed)`` (PCG64).

    Every projection matrix and bias is ``N(0, 1) / sqrt(embed_dim)``; layer
    norm scales are ``1 + 0.1 N(0, 1)`` and shifts ``0.1 N(0, 1)``.  Arrays are
    drawn layer by layer in a fixed order, so the same config always yields
    bit-identical weights.
    """
    if not isinstance(config, EncoderConfig):
        raise ConfigError("init_encoder expects an EncoderConfig")
    rng = np.random.default_rng(config.seed)
    e, f = config.embed_dim, config.ffn_dim
    scale = 1.0 / np.sqrt(e)

    def mat(rows, cols):
        return rng.standard_normal((rows, cols)) * scale

    def vec(n):
        return rng.standard_normal(n) * scale

    layers = []
    for _ in range(config.num_layers):
        layers.append(
            LayerWeights(
                w_q=mat(e, e), b_q=vec(e),
                w_k=mat(e, e), b_k=vec(e),
                w_v=mat(e, e), b_v=vec(e),
                w_o=mat(e, e), b_o=vec(e),
                ln1_gamma=1.0 + 0.1 * rng.standard_normal(e),
                ln1_beta=0.1 * rng.standard_normal(e),
                ln2_gamma=1.0 + 0.1 * rng.standard_normal(e),
                ln2_beta=0.1 * rng.standard_normal(e),
                w_up=mat(e, f), b_up=vec(f),
                w_down=mat(f, e), b_down=vec(e),
            )
        )
    return EncoderWeights(config, layers)


def zero_encoder(config: EncoderConfig) -> EncoderWeights:
    """Encoder whose projections, biases and layer norms are all zero."""
    e, f = config.embed_dim, config.ffn_dim
    z = np.zeros
    layers = [
        LayerWeights(
            w_q=z((e, e)), b_q=z(e), w_k=z((e, e)), b_k=z(e),
            w_v=z((e, e)), b_v=z(e), w_o=z((e, e)), b_o=z(e),
            ln1_gamma=z(e), ln1_beta=z(e), ln2_gamma=z(e), ln2_beta=z(e),
            w_up=z((e, f)), b_up=z(f), w_down=z((f, e)), b_down=z(e),
        )
        for _ in range(config.num_layers)
    ]
    return EncoderWeights(config, layers)


def quick_gelu(x: np.ndarray) -> np.ndarray:
    # CLIP's activation: x * sigmoid(1.702 x)
    return x / (1.0 + np.exp(-1.702 * x))


def ffn(layer: LayerWeights, x: np.ndarray) -> np.ndarray:
    return quick_gelu(x @ layer.w_up + layer.b_up) @ layer.w_down + layer.b_down


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    t, e = x.shape
    return x.reshape(t, heads, e // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, t, d = x.shape
    return x.transpose(1, 0, 2).reshape(t, h * d)


def _head_softmax(logits: np.ndarray) -> np.ndarray:
    return np.stack([row_softmax(l) for l in logits])


def project_qkv(layer: LayerWeights, x: np.ndarray, heads: int):
    h = layer_norm(x, layer.ln1_gamma, layer.ln1_beta, LN_EPS)
    q = _split_heads(h @ layer.w_q + layer.b_q, heads)
    k = _split_heads(h @ layer.w_k + layer.b_k, heads)
    v = _split_heads(h @ layer.w_v + layer.b_v, heads)
    return q, k, v


def attend(layer: LayerWeights, weights: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply per-head weights to V, concatenate heads, output projection."""
    return _merge_heads(weights @ v) @ layer.w_o + layer.b_o


def forward(weights: EncoderWeights, x0) -> EncoderTrace:
    cfg = weights.config
    x = as_matrix(x0, "x0")
    if x.shape != (cfg.num_tokens, cfg.embed_dim):
        raise ShapeError(
            f"input shape {x.shape} does not match expected {(cfg.num_tokens, cfg.embed_dim)}"
        )
    scale = 1.0 / np.sqrt(cfg.head_dim)
    hidden, qs, ks, vs, attns = [x], [], [], [], []
    for layer in weights.layers:
        q, k, v = project_qkv(layer, x, cfg.num_heads)
        a = _head_softmax(q @ k.transpose(0, 2, 1) * scale)
        x_re = x + attend(layer, a, v)
        x = x_re + ffn(layer, layer_norm(x_re, layer.ln2_gamma, layer.ln2_beta, LN_EPS))
        hidden.append(x)
        qs.append(q)
        ks.append(k)
        vs.append(v)
        attns.append(a)
    return EncoderTrace(hidden, qs, ks, vs, attns, cfg.has_cls)


def _check_trace(weights: EncoderWeights, trace: EncoderTrace) -> None:
    cfg = weights.config
    if trace.num_layers == 0:
        raise ConsistencyError("trace has no layers")
    if trace.num_layers != cfg.num_layers:
        raise ConsistencyError(
            f"trace has {trace.num_layers} layers, weights have {cfg.num_layers}"
        )
    if trace.hidden[-2].shape != (cfg.num_tokens, cfg.embed_dim):
        raise ConsistencyError(
            f"trace hidden shape {trace.hidden[-2].shape} does not fit config"
        )
    q, _, _ = project_qkv(weights.layers[-1], trace.hidden[-2], cfg.num_heads)
    if not np.allclose(q, trace.q[-1], rtol=1e-9, atol=1e-9):
        raise ConsistencyError("trace was not produced by these weights")


def decompose_last_layer(weights: EncoderWeights, trace: EncoderTrace) -> Decomposition:
    """Split the final hidden state into the previous hidden state and the
    projected last-layer attention output, then rebuild it from the two."""
    _check_trace(weights, trace)
    layer = weights.layers[-1]
    s_d = trace.hidden[-2]
    a_d = attend(layer, trace.attention[-1], trace.v[-1])
    mixed = s_d + a_d
    recon = mixed + ffn(layer, layer_norm(mixed, layer.ln2_gamma, layer.ln2_beta, LN_EPS))
    err = float(np.max(np.abs(recon - trace.final)))
    return Decomposition(s_d=s_d, a_d=a_d, reconstruction=recon, max_error=err)


def _operands(trace: EncoderTrace, variant: str):
    q, k, v = trace.q[-1], trace.k[-1], trace.v[-1]
    pairs = {"qkv": (q, k), "qqv": (q, q), "vvv": (v, v), "kkv": (k, k)}
    if variant not in pairs:
        raise ConfigError(f"unknown attention variant {variant!r}; expected one of {VARIANTS}")
    return pairs[variant]


def decoupled_logits(trace: EncoderTrace, variant: str = "qqv") -> np.ndarray:
    """Pre-softmax per-head logits ``(heads, tokens, tokens)`` of the last layer."""
    left, right = _operands(trace, variant)
    return left @ right.transpose(0, 2, 1) / np.sqrt(left.shape[-1])


def decoupled_attention(weights: EncoderWeights, trace: EncoderTrace, variant: str = "qqv") -> np.ndarray:
    """Attention component of the last layer with a chosen operand pairing.

    ``qkv`` is ordinary attention and reproduces ``decompose_last_layer().a_d``;
    ``qqv`` uses ``Q Q^T``, ``kkv`` ``K K^T`` and ``vvv`` ``V V^T``.  Values are
    always the last layer's V, heads are concatenated and sent through the
    layer's output projection (bias included).
    """
    logits = decoupled_logits(trace, variant)
    _check_trace(weights, trace)
    return attend(weights.layers[-1], _head_softmax(logits), trace.v[-1])


def cls_saliency(trace: EncoderTrace) -> np.ndarray:
    """Head-averaged last-layer attention received by each patch token.

    With a CLS token this is the CLS row restricted to patch columns.
    Without one it is the column mean of the averaged attention over patch
    rows.
    """
    if not trace.attention:
        raise ConsistencyError("trace has no attention layers")
    mean_attn = trace.attention[-1].mean(axis=0)
    if trace.has_cls:
        return mean_attn[0, 1:].copy()
    return mean_attn.mean(axis=0)


def patch_rows(trace: EncoderTrace, m: np.ndarray) -> np.ndarray:
    return m[1:] if trace.has_cls else m
