"""Exact brute-force cosine similarity search."""

from __future__ import annotations

import logging

import numpy as np

from .exceptions import RerankDimensionError, RerankValidationError
from .models import EmbeddingSet, TopKResult
from .parallel import block_bounds, map_blocks

LOG = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 256
CORPUS_BLOCK_SIZE = 8192


def unit_rows(embeddings: EmbeddingSet, name: str = "embeddings") -> np.ndarray:
    """Return the rows scaled to unit norm, in float64."""
    values = embeddings.vectors.astype(np.float64)
    norms = np.linalg.norm(values, axis=1, keepdims=True)
    zero = np.flatnonzero(norms[:, 0] == 0.0)
    if zero.size:
        row = int(zero[0])
        raise RerankValidationError(
            f"Zero-norm row {row} ({embeddings.ids[row]!r}) in {name}"
        )
    return values / norms


def _check_dims(queries: EmbeddingSet, corpus: EmbeddingSet) -> None:
    if queries.dim != corpus.dim:
        raise RerankDimensionError(
            f"Query dimension {queries.dim} does not match corpus dimension {corpus.dim}"
        )


def _merge(
    best_idx: np.ndarray,
    best_scores: np.ndarray,
    idx: np.ndarray,
    scores: np.ndarray,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Keep the k best of two candidate lists: score desc, then index asc."""
    cand_idx = np.hstack((best_idx, idx))
    cand_scores = np.hstack((best_scores, scores))
    order = np.lexsort((cand_idx, -cand_scores), axis=1)[:, :k]
    return (
        np.take_along_axis(cand_idx, order, axis=1),
        np.take_along_axis(cand_scores, order, axis=1),
    )


def _topk_block(
    queries: np.ndarray,
    corpus: np.ndarray,
    k: int,
    penalty: np.ndarray | None,
    corpus_block_size: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Top-k over the whole corpus for one block of unit query rows."""
    best_idx = np.empty((len(queries), 0), dtype=np.int64)
    best_scores = np.empty((len(queries), 0), dtype=np.float64)

    for start, stop in block_bounds(len(corpus), corpus_block_size):
        scores = queries @ corpus[start:stop].T
        if penalty is not None:
            scores -= penalty[start:stop]
        width = min(k, stop - start)
        # stable sort keeps ascending corpus index among equal scores
        order = np.argsort(-scores, axis=1, kind="stable")[:, :width]
        idx = order + start
        top = np.take_along_axis(scores, order, axis=1)
        if best_idx.shape[1] == 0:
            best_idx, best_scores = idx, top
        else:
            best_idx, best_scores = _merge(best_idx, best_scores, idx, top, k)

    return best_idx, best_scores


def cosine_topk(
    queries: EmbeddingSet,
    corpus: EmbeddingSet,
    k: int,
    *,
    penalty: np.ndarray | None = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
    corpus_block_size: int = CORPUS_BLOCK_SIZE,
) -> TopKResult:
    """Return the k most cosine-similar corpus rows for every query row.

    Scores are sorted descending with ties broken by ascending corpus index.
    When ``penalty`` is given, ``penalty[j]`` is subtracted from every score
    against corpus row j before selection. An empty corpus yields empty
    neighbor lists.
    """
    if k < 1:
        raise RerankValidationError(f"k must be at least 1, got {k}")
    _check_dims(queries, corpus)
    if penalty is not None:
        penalty = np.asarray(penalty, dtype=np.float64)
        if penalty.shape != (len(corpus),):
            raise RerankDimensionError(
                f"Penalty has shape {penalty.shape}, corpus has {len(corpus)} rows"
            )

    query_units = unit_rows(queries, "queries")
    width = min(k, len(corpus))
    if width == 0 or len(queries) == 0:
        return TopKResult(
            k=k,
            indices=np.empty((len(queries), width), dtype=np.int64),
            scores=np.empty((len(queries), width), dtype=np.float64),
        )
    corpus_units = unit_rows(corpus, "corpus")

    blocks = map_blocks(
        lambda start, stop: _topk_block(
            query_units[start:stop], corpus_units, k, penalty, corpus_block_size
        ),
        len(queries),
        block_size,
        threads,
    )
    LOG.debug(
        f"Top-{k} search: {len(queries)} queries x {len(corpus)} corpus rows "
        f"in {len(blocks)} blocks"
    )
    return TopKResult(
        k=k,
        indices=np.vstack([idx for idx, _ in blocks]),
        scores=np.vstack([scores for _, scores in blocks]),
    )


def mean_topk_similarity(
    embeddings: EmbeddingSet,
    pool: EmbeddingSet,
    k: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> np.ndarray:
    """Return, per row, the mean of its min(k, |pool|) highest cosines against ``pool``."""
    _check_dims(embeddings, pool)
    if len(pool) == 0:
        raise RerankValidationError("Similarity pool is empty")
    result = cosine_topk(
        embeddings, pool, k, block_size=block_size, threads=threads
    )
    if result.n_queries == 0:
        return np.zeros(0, dtype=np.float64)
    return result.scores.mean(axis=1)
