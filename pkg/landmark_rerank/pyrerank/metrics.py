"""Global Average Precision (micro-AP) scoring of landmark predictions.

All predictions form one list sorted by confidence (descending, ties by
ascending image id). With M the number of test images that carry a
ground-truth landmark::

    GAP = 1/M * sum_i P(i) * rel(i)

where P(i) is the precision over the first i predictions and rel(i) is 1
when prediction i names its image's landmark. Predictions on images without
ground truth (non-landmarks) are always wrong; landmark images without a
prediction add nothing but still count in M.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import replace

import numpy as np

from .exceptions import RerankValidationError
from .models import (
    EmbeddingSet,
    GapReport,
    LabelTable,
    PipelineComparison,
    RankedPrediction,
    RerankParams,
)
from .rerank import baseline_rank, rerank
from .similarity import DEFAULT_BLOCK_SIZE

LOG = logging.getLogger(__name__)


def gap(
    predictions: Sequence[RankedPrediction],
    ground_truth: LabelTable,
    include_ranks: bool = False,
) -> GapReport:
    """Score predictions with Global Average Precision."""
    seen: set[str] = set()
    for prediction in predictions:
        if prediction.image_id in seen:
            raise RerankValidationError(
                f"More than one prediction for image {prediction.image_id!r}"
            )
        seen.add(prediction.image_id)

    m_landmarks = len(ground_truth)
    if m_landmarks == 0:
        raise RerankValidationError("Ground truth holds no landmark images")

    ordered = sorted(predictions, key=lambda p: (-p.confidence, p.image_id))
    correct = np.array(
        [ground_truth.get(p.image_id) == p.landmark_id for p in ordered], dtype=bool
    )
    if correct.size:
        precision = np.cumsum(correct) / np.arange(1, correct.size + 1)
        score = float(precision[correct].sum() / m_landmarks)
    else:
        score = 0.0

    LOG.debug(
        f"GAP {score:.6f} over {len(ordered)} predictions, "
        f"{int(correct.sum())} correct, M={m_landmarks}"
    )
    return GapReport(
        gap=score,
        m_landmarks=m_landmarks,
        n_predictions=len(ordered),
        correct_at_rank=tuple(bool(c) for c in correct) if include_ranks else None,
    )


def compare_pipelines(
    test: EmbeddingSet,
    train: EmbeddingSet,
    train_labels: LabelTable,
    nonlandmark: EmbeddingSet,
    ground_truth: LabelTable,
    params: RerankParams,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> PipelineComparison:
    """Score the unpenalized kNN baseline and the re-ranker on the same inputs."""
    baseline = baseline_rank(
        test,
        train,
        train_labels,
        params.k_neighbors,
        block_size=block_size,
        threads=threads,
    )
    reranked = rerank(
        test,
        train,
        train_labels,
        nonlandmark,
        params,
        block_size=block_size,
        threads=threads,
    )
    comparison = PipelineComparison(
        baseline=gap(baseline, ground_truth), reranked=gap(reranked, ground_truth)
    )
    LOG.debug(
        f"GAP baseline {comparison.baseline.gap:.4f}, reranked "
        f"{comparison.reranked.gap:.4f} (delta {comparison.delta:+.4f})"
    )
    return comparison


ABLATIONS = {
    "none": (False, False),
    "b_only": (True, False),
    "c_only": (False, True),
    "b_and_c": (True, True),
}


def penalty_ablation(
    test: EmbeddingSet,
    train: EmbeddingSet,
    train_labels: LabelTable,
    nonlandmark: EmbeddingSet,
    ground_truth: LabelTable,
    params: RerankParams,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> dict[str, GapReport]:
    """Score every on/off combination of the B and C penalties."""
    reports = {}
    for name, (apply_b, apply_c) in ABLATIONS.items():
        predictions = rerank(
            test,
            train,
            train_labels,
            nonlandmark,
            replace(params, apply_b=apply_b, apply_c=apply_c),
            block_size=block_size,
            threads=threads,
        )
        reports[name] = gap(predictions, ground_truth)
    return reports
