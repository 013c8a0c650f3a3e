"""pyrerank - landmark recognition ranking from precomputed embeddings."""

from .embedding_store import (
    EmbeddingFormat,
    filter_train_to_test_classes,
    load_embeddings,
    load_labels,
    save_embeddings,
    save_labels,
)
from .ensemble import (
    concat_ensemble,
    ensemble_candidates,
    preprocess_bundle,
    topk_sum_ensemble,
)
from .exceptions import (
    RerankDimensionError,
    RerankError,
    RerankFormatError,
    RerankIOError,
    RerankValidationError,
)
from .metrics import compare_pipelines, gap, penalty_ablation
from .models import (
    EmbeddingSet,
    EnsembleMode,
    GapReport,
    LabelTable,
    ModelBundle,
    PipelineComparison,
    PooledC,
    QuantileTransform,
    RankedPrediction,
    RerankParams,
    Role,
    RoleSets,
    SynthConfig,
    SynthInstance,
    TopKResult,
    TransformMode,
)
from .normalize import (
    apply_quantile_transform,
    fit_quantile_transform,
    l2_normalize,
    load_quantile_transform,
    save_quantile_transform,
)
from .rerank import (
    aggregate_label,
    baseline_rank,
    load_predictions,
    penalized_topk,
    rerank,
    train_penalty,
    write_predictions,
)
from .similarity import cosine_topk, mean_topk_similarity
from .synth import generate, write_instance

__all__ = [
    "EmbeddingFormat",
    "EmbeddingSet",
    "EnsembleMode",
    "GapReport",
    "LabelTable",
    "ModelBundle",
    "PipelineComparison",
    "PooledC",
    "QuantileTransform",
    "RankedPrediction",
    "RerankParams",
    "Role",
    "RoleSets",
    "SynthConfig",
    "SynthInstance",
    "TopKResult",
    "TransformMode",
    "RerankError",
    "RerankDimensionError",
    "RerankFormatError",
    "RerankIOError",
    "RerankValidationError",
    "aggregate_label",
    "apply_quantile_transform",
    "baseline_rank",
    "compare_pipelines",
    "concat_ensemble",
    "cosine_topk",
    "ensemble_candidates",
    "filter_train_to_test_classes",
    "fit_quantile_transform",
    "gap",
    "generate",
    "l2_normalize",
    "load_embeddings",
    "load_labels",
    "load_predictions",
    "load_quantile_transform",
    "mean_topk_similarity",
    "penalized_topk",
    "penalty_ablation",
    "preprocess_bundle",
    "rerank",
    "save_embeddings",
    "save_labels",
    "save_quantile_transform",
    "topk_sum_ensemble",
    "train_penalty",
    "write_instance",
    "write_predictions",
]
