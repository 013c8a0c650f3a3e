"""Landmark prediction with non-landmark penalization.

For every test image X_i the re-ranker

1. computes cosine similarities A against all train images Y,
2. scores every train image by its mean similarity to the k most similar
   non-landmark images Z (B),
3. penalizes A column-wise: A'[i, j] = A[i, j] - B[j],
4. takes the top-k of A', sums scores per landmark label and keeps the best
   label with its summed score as confidence,
5. subtracts C_i, the mean similarity of X_i to its k most similar
   non-landmark images.

Top-k in step 4 is taken over the penalized matrix. Embeddings must already
be normalized/transformed by the caller.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from collections.abc import Iterable, Sequence

import numpy as np

from .embedding_store import atomic_write, read_text
from .exceptions import RerankDimensionError, RerankFormatError, RerankValidationError
from .models import EmbeddingSet, LabelTable, RankedPrediction, RerankParams, TopKResult
from .similarity import DEFAULT_BLOCK_SIZE, cosine_topk, mean_topk_similarity

LOG = logging.getLogger(__name__)

PREDICTION_HEADER = ("image_id", "landmark_id", "confidence")


def train_penalty(
    train: EmbeddingSet,
    nonlandmark: EmbeddingSet,
    k: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> np.ndarray:
    """Return B: each train row's mean similarity to its k nearest non-landmarks."""
    return mean_topk_similarity(
        train, nonlandmark, k, block_size=block_size, threads=threads
    )


def confidence_penalty(
    test: EmbeddingSet,
    nonlandmark: EmbeddingSet,
    k: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> np.ndarray:
    """Return C: each test row's mean similarity to its k nearest non-landmarks."""
    return mean_topk_similarity(
        test, nonlandmark, k, block_size=block_size, threads=threads
    )


def penalized_topk(
    test: EmbeddingSet,
    train: EmbeddingSet,
    penalty: np.ndarray,
    k: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> TopKResult:
    """Return the per-test-row top-k of A'[i, j] = cos(x_i, y_j) - B[j]."""
    penalty = np.asarray(penalty, dtype=np.float64)
    if penalty.shape != (len(train),):
        raise RerankDimensionError(
            f"Penalty has {penalty.size} entries for {len(train)} train rows"
        )
    return cosine_topk(
        test, train, k, penalty=penalty, block_size=block_size, threads=threads
    )


def _best_label(labelled: Iterable[tuple[int, float]]) -> tuple[int, float]:
    """Sum scores per label and return the best, ties to the smaller label."""
    totals: dict[int, float] = {}
    for label, score in labelled:
        totals[label] = totals.get(label, 0.0) + score
    if not totals:
        raise RerankValidationError("Cannot aggregate an empty neighbor list")
    return min(totals.items(), key=lambda item: (-item[1], item[0]))


def aggregate_label(
    neighbors: Sequence[tuple[int, float]],
    train_labels: LabelTable,
    train_ids: Sequence[str],
) -> tuple[int, float]:
    """Pick the landmark with the highest summed neighbor score.

    Scores are summed per landmark label, negative ones included; equal sums
    go to the smaller landmark id.
    """
    labelled = []
    for index, score in neighbors:
        label = train_labels.get(train_ids[index])
        if label is None:
            raise RerankValidationError(
                f"Neighbor {train_ids[index]!r} (train row {index}) has no label"
            )
        labelled.append((label, score))
    return _best_label(labelled)


def aggregate_topk(
    results: Sequence[TopKResult],
    train_labels: np.ndarray,
    train_ids: Sequence[str],
) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate pooled neighbors of one or more searches, row by row.

    ``train_labels`` is aligned with ``train_ids`` and holds -1 for unlabeled
    images; an unlabeled image among the neighbors is an error.
    """
    n = results[0].n_queries
    labels = np.empty(n, dtype=np.int64)
    scores = np.empty(n, dtype=np.float64)
    for i in range(n):
        labelled = []
        for result in results:
            for index, score in result.neighbors(i):
                label = int(train_labels[index])
                if label < 0:
                    raise RerankValidationError(
                        f"Neighbor {train_ids[index]!r} (train row {index}) has no label"
                    )
                labelled.append((label, score))
        labels[i], scores[i] = _best_label(labelled)
    return labels, scores


def _check_inputs(
    test: EmbeddingSet, train: EmbeddingSet, nonlandmark: EmbeddingSet
) -> None:
    if len(train) == 0:
        raise RerankValidationError("Train set is empty")
    dims = {"test": test.dim, "train": train.dim, "nonlandmark": nonlandmark.dim}
    if len(set(dims.values())) != 1:
        raise RerankDimensionError(f"Embedding dimensions differ: {dims}")


def build_predictions(
    ids: Sequence[str], labels: np.ndarray, confidences: np.ndarray
) -> list[RankedPrediction]:
    """Zip ids, labels and confidences into predictions."""
    return [
        RankedPrediction(image_id=image_id, landmark_id=int(label), confidence=float(c))
        for image_id, label, c in zip(ids, labels, confidences, strict=True)
    ]


def baseline_rank(
    test: EmbeddingSet,
    train: EmbeddingSet,
    train_labels: LabelTable,
    k: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> list[RankedPrediction]:
    """Plain kNN: top-k cosine neighbors aggregated by label, no penalties."""
    if len(train) == 0:
        raise RerankValidationError("Train set is empty")
    topk = cosine_topk(test, train, k, block_size=block_size, threads=threads)
    labels, scores = aggregate_topk(
        [topk], train_labels.lookup(train.ids), train.ids
    )
    return build_predictions(test.ids, labels, scores)


def rerank(
    test: EmbeddingSet,
    train: EmbeddingSet,
    train_labels: LabelTable,
    nonlandmark: EmbeddingSet,
    params: RerankParams,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> list[RankedPrediction]:
    """Predict one landmark per test image, penalizing non-landmark lookalikes.

    With an empty non-landmark pool both penalties are zero and the result
    equals ``baseline_rank``.
    """
    _check_inputs(test, train, nonlandmark)
    use_pool = len(nonlandmark) > 0
    if not use_pool:
        LOG.warning("Non-landmark pool is empty, ranking without penalties")

    if use_pool and params.apply_b:
        b = train_penalty(
            train,
            nonlandmark,
            params.k_train_penalty,
            block_size=block_size,
            threads=threads,
        )
    else:
        b = np.zeros(len(train), dtype=np.float64)

    topk = penalized_topk(
        test, train, b, params.k_neighbors, block_size=block_size, threads=threads
    )
    labels, scores = aggregate_topk([topk], train_labels.lookup(train.ids), train.ids)

    if use_pool and params.apply_c:
        c = confidence_penalty(
            test,
            nonlandmark,
            params.k_test_penalty,
            block_size=block_size,
            threads=threads,
        )
        scores = scores - c

    LOG.debug(
        f"Re-ranked {len(test)} test images against {len(train)} train "
        f"and {len(nonlandmark)} non-landmark images"
    )
    return build_predictions(test.ids, labels, scores)


def format_predictions(predictions: Iterable[RankedPrediction]) -> str:
    """Render predictions as CSV text, confidences at 9 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PREDICTION_HEADER)
    for prediction in predictions:
        writer.writerow(
            [
                prediction.image_id,
                prediction.landmark_id,
                f"{prediction.confidence:.9g}",
            ]
        )
    return buffer.getvalue()


def write_predictions(
    predictions: Iterable[RankedPrediction], path: str | os.PathLike
) -> None:
    """Write the predictions CSV atomically."""
    atomic_write(path, format_predictions(predictions).encode("utf-8"))


def load_predictions(path: str | os.PathLike) -> list[RankedPrediction]:
    """Read a predictions CSV; the header row is optional."""
    text = read_text(path)
    where = str(path)
    predictions: list[RankedPrediction] = []
    for record in csv.reader(io.StringIO(text)):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        if tuple(field.strip() for field in record) == PREDICTION_HEADER:
            continue
        row = len(predictions)
        if len(record) != 3:
            raise RerankFormatError(
                f"Expected 3 fields, got {len(record)}", path=where, row=row
            )
        image_id = record[0].strip()
        try:
            landmark_id = int(record[1])
        except ValueError as err:
            raise RerankFormatError(
                f"Landmark id is not an integer: {record[1]!r}",
                path=where,
                row=row,
                field=1,
            ) from err
        try:
            confidence = float(record[2])
        except ValueError as err:
            raise RerankFormatError(
                f"Confidence is not a number: {record[2]!r}",
                path=where,
                row=row,
                field=2,
            ) from err
        if landmark_id < 0 or not math.isfinite(confidence):
            raise RerankFormatError(
                "Negative landmark id or non-finite confidence", path=where, row=row
            )
        predictions.append(RankedPrediction(image_id, landmark_id, confidence))
    return predictions
