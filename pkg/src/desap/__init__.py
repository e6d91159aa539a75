"""Decoupled-similarity visual token pruning on a toy ViT encoder.

Modules:

- :mod:`desap.tensor` dense float64 kernels (softmax, layer norm, cosine, top-k)
- :mod:`desap.encoder` toy encoder, last-layer decomposition, attention variants, CLS saliency
- :mod:`desap.alignment` fine-grained cross-modal alignment and the task map
- :mod:`desap.pruning` dual-source selection and token merging
- :mod:`desap.flops` prefill FLOPs cost model
- :mod:`desap.io` DSAP tensor files, PGM heatmaps, run configs
"""
from .alignment import (
    AlignmentResult,
    TextEmbedding,
    decoupled_similarity,
    fine_grained_alignment,
    representative_weights,
    task_attention_map,
    token_similarity,
    vanilla_similarity,
)
from .encoder import (
    Decomposition,
    EncoderConfig,
    EncoderTrace,
    EncoderWeights,
    cls_saliency,
    decompose_last_layer,
    decoupled_attention,
    decoupled_logits,
    forward,
    init_encoder,
)
from .errors import BudgetError, ConfigError, ConsistencyError, DesapError, FormatError, ShapeError
from .flops import (
    FlopsReport,
    ModelDims,
    PRESETS,
    alignment_overhead_flops,
    flops_report,
    layer_flops,
    reduction_ratio,
    total_flops,
)
from .pruning import (
    PruneBudget,
    PruneParams,
    PruneResult,
    allocate_budget,
    dual_rank_prune,
    merge_tokens,
    prune_from_scores,
    prune_pipeline,
)

__version__ = "0.1.0"
