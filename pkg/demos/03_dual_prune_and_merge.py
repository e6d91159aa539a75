"""
Retention split between the two score maps
==========================================

Sweep the share of the budget given to the task map, from pure saliency
(split=0) to pure task relevance (split=1), and look at which patches
survive and how many discarded tokens each survivor absorbs.
"""
import numpy as np

from desap import EncoderConfig, PruneParams, TextEmbedding, forward, init_encoder, prune_pipeline

cfg = EncoderConfig(num_layers=2, num_heads=4, embed_dim=32, ffn_dim=64, num_patches=36, seed=5)
weights = init_encoder(cfg)
rng = np.random.default_rng(6)
trace = forward(weights, rng.standard_normal((cfg.num_tokens, cfg.embed_dim)))
text = TextEmbedding(rng.standard_normal((6, cfg.embed_dim)))

for split in (0.0, 0.25, 0.5, 0.75, 1.0):
    res = prune_pipeline(trace, weights, text, PruneParams(total_keep=8, split=split))
    sizes = {c: 1 for c in res.retained.tolist()}
    for center in res.assignment.values():
        sizes[center] += 1
    print(f"split={split:.2f}  task={res.task_set.tolist()}  saliency={res.saliency_set.tolist()}")
    print(f"            cluster sizes {[sizes[c] for c in res.retained.tolist()]}")

# Merging keeps the token count at K while conserving the summed features.
res = prune_pipeline(trace, weights, text, PruneParams(total_keep=8))
sizes = np.array([1 + sum(c == r for c in res.assignment.values()) for r in res.retained])
patches = trace.final[1:]
print("mass conserved:", np.allclose((sizes[:, None] * res.merged_tokens).sum(0), patches.sum(0)))
