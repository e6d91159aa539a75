"""
Prefill cost of the visual tokens
=================================

Decoder prefill FLOPs for a LLaVA-1.5-7B sized model at the usual retention
budgets, plus the cost of the alignment step itself.
"""
from desap.flops import PRESETS, alignment_overhead_flops, flops_report

dims = PRESETS["llava15-7b"]
print(f"{'kept':>5} {'pruned':>8} {'TFLOPs':>8} {'R':>7} {'speedup':>8}")
for kept in (576, 192, 128, 64):
    r = flops_report(dims, 576, kept)
    print(f"{kept:>5} {1 - kept / 576:>8.1%} {r.post_pruning / 1e12:>8.2f} {r.reduction_ratio:>7.3f} {r.speedup:>7.2f}x")

overhead = alignment_overhead_flops(576, 30, 768)
print(f"\nalignment overhead: {overhead:.3e} FLOPs "
      f"({overhead / flops_report(dims, 576, 64).post_pruning:.1e} of the pruned prefill)")
