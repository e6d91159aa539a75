"""
Text-guided patch scores
========================

Compare the baseline map (cosine of final hidden states with the text) to
the decoupled map built from the attention component with query-query
attention and the weighted cross-modal alignment.  Both maps, and the CLS
saliency map, are written as 4x4 PGM heatmaps.
"""
from pathlib import Path

import numpy as np

from desap import (
    EncoderConfig,
    TextEmbedding,
    cls_saliency,
    decoupled_attention,
    decoupled_similarity,
    forward,
    init_encoder,
    vanilla_similarity,
)
from desap.io import emit_heatmap

out = Path("demo_out")
out.mkdir(exist_ok=True)

cfg = EncoderConfig(num_layers=3, num_heads=4, embed_dim=32, ffn_dim=64, num_patches=16, seed=3)
weights = init_encoder(cfg)
rng = np.random.default_rng(4)
trace = forward(weights, rng.standard_normal((cfg.num_tokens, cfg.embed_dim)))

# 5 text tokens; the last real one stands in for EOS.  Two padding rows are
# dropped by the mask.
raw_text = np.vstack([rng.standard_normal((5, cfg.embed_dim)), np.zeros((2, cfg.embed_dim))])
text = TextEmbedding.from_padded(raw_text, [True] * 5 + [False] * 2)

vanilla = vanilla_similarity(trace.final, text)[1:]
for variant in ("qkv", "qqv", "vvv", "kkv"):
    a_d = decoupled_attention(weights, trace, variant)
    res = decoupled_similarity(a_d, text, cls_row=0, lam=0.1)
    a_t = res.a_t[1:]
    print(f"{variant}: top-4 patches {np.argsort(-a_t, kind='stable')[:4].tolist()}")
    emit_heatmap(a_t, (4, 4), out / f"task_{variant}.pgm")

emit_heatmap(vanilla, (4, 4), out / "vanilla.pgm")
emit_heatmap(cls_saliency(trace), (4, 4), out / "cls_saliency.pgm")
print("vanilla: top-4 patches", np.argsort(-vanilla, kind="stable")[:4].tolist())
print("heatmaps written to", out.resolve())
