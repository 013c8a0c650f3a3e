"""Combining embeddings from several models.

Two schemes are supported:

- concatenation: L2-normalize each model, concatenate along the feature
  axis, fit one quantile transform on the concatenated test set and run the
  re-ranker on the wide vectors;
- top-k sum: preprocess each model on its own, take every model's penalized
  top-k neighbors, pool all M*k pairs and sum scores per label.
"""

from __future__ import annotations

import logging

import numpy as np

from .exceptions import RerankValidationError
from .models import (
    EmbeddingSet,
    LabelTable,
    ModelBundle,
    PooledC,
    RankedPrediction,
    RerankParams,
    RoleSets,
    TopKResult,
    TransformMode,
)
from .normalize import apply_quantile_transform, fit_quantile_transform, l2_normalize
from .rerank import (
    aggregate_topk,
    build_predictions,
    confidence_penalty,
    penalized_topk,
    train_penalty,
)
from .similarity import DEFAULT_BLOCK_SIZE

LOG = logging.getLogger(__name__)


def normalize_roles(model: RoleSets) -> RoleSets:
    """L2-normalize the three roles of one model."""
    return RoleSets(
        test=l2_normalize(model.test),
        train=l2_normalize(model.train),
        nonlandmark=l2_normalize(model.nonlandmark),
    )


def transform_roles(
    model: RoleSets,
    n_quantiles: int | None = None,
    transform_mode: TransformMode = TransformMode.ALL_ROLES,
    threads: int = 1,
) -> RoleSets:
    """Fit the quantile transform on the test role and apply it per mode."""
    transform_mode = TransformMode(transform_mode)
    qt = fit_quantile_transform(model.test, n_quantiles)
    test = model.test
    if transform_mode is TransformMode.ALL_ROLES:
        test = apply_quantile_transform(qt, model.test, threads=threads)
    return RoleSets(
        test=test,
        train=apply_quantile_transform(qt, model.train, threads=threads),
        nonlandmark=apply_quantile_transform(qt, model.nonlandmark, threads=threads),
    )


def _concat(sets: list[EmbeddingSet]) -> EmbeddingSet:
    first = sets[0]
    return EmbeddingSet(
        ids=first.ids,
        vectors=np.hstack([s.vectors for s in sets]),
        role=first.role,
    )


def concatenate_models(bundle: ModelBundle) -> RoleSets:
    """Concatenate every role along the feature axis, in model order."""
    return RoleSets(
        test=_concat([m.test for m in bundle.models]),
        train=_concat([m.train for m in bundle.models]),
        nonlandmark=_concat([m.nonlandmark for m in bundle.models]),
    )


def concat_ensemble(
    bundle: ModelBundle,
    n_quantiles: int | None = None,
    transform_mode: TransformMode = TransformMode.ALL_ROLES,
    threads: int = 1,
) -> RoleSets:
    """Normalize each model, concatenate, then quantile-transform the result.

    The concatenated vectors are not re-normalized; the transform is fitted
    on the concatenated test set.
    """
    normalized = ModelBundle(tuple(normalize_roles(m) for m in bundle.models))
    combined = concatenate_models(normalized)
    LOG.debug(
        f"Concatenated {len(bundle)} models: dims {bundle.dims} -> {combined.dim}"
    )
    return transform_roles(combined, n_quantiles, transform_mode, threads)


def preprocess_bundle(
    bundle: ModelBundle,
    n_quantiles: int | None = None,
    transform_mode: TransformMode = TransformMode.ALL_ROLES,
    threads: int = 1,
) -> ModelBundle:
    """Normalize and transform every model separately, without concatenation."""
    return ModelBundle(
        tuple(
            transform_roles(normalize_roles(m), n_quantiles, transform_mode, threads)
            for m in bundle.models
        )
    )


def ensemble_candidates(
    bundle: ModelBundle,
    params: RerankParams,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> list[TopKResult]:
    """Return every model's penalized top-k_neighbors search, in model order."""
    results = []
    for m, model in enumerate(bundle.models):
        if params.apply_b and len(model.nonlandmark) > 0:
            b = train_penalty(
                model.train,
                model.nonlandmark,
                params.k_train_penalty,
                block_size=block_size,
                threads=threads,
            )
        else:
            b = np.zeros(len(model.train), dtype=np.float64)
        results.append(
            penalized_topk(
                model.test,
                model.train,
                b,
                params.k_neighbors,
                block_size=block_size,
                threads=threads,
            )
        )
        LOG.debug(f"Collected top-{params.k_neighbors} candidates for model {m}")
    return results


def topk_sum_ensemble(
    bundle: ModelBundle,
    train_labels: LabelTable,
    params: RerankParams,
    pooled_c: PooledC = PooledC.MEAN,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> list[RankedPrediction]:
    """Sum every model's penalized top-k scores per label and pick the best.

    When ``params.apply_c`` holds and ``pooled_c`` is ``mean``, the
    confidence is reduced by the mean of the per-model C penalties.
    Expects preprocessed models (see ``preprocess_bundle``).
    """
    pooled_c = PooledC(pooled_c)
    first = bundle.models[0]
    if len(first.train) == 0:
        raise RerankValidationError("Train set is empty")

    results = ensemble_candidates(
        bundle, params, block_size=block_size, threads=threads
    )
    labels, scores = aggregate_topk(
        results, train_labels.lookup(first.train.ids), first.train.ids
    )

    if params.apply_c and pooled_c is PooledC.MEAN and len(first.nonlandmark) > 0:
        penalties = [
            confidence_penalty(
                model.test,
                model.nonlandmark,
                params.k_test_penalty,
                block_size=block_size,
                threads=threads,
            )
            for model in bundle.models
        ]
        scores = scores - np.mean(np.vstack(penalties), axis=0)

    return build_predictions(first.test.ids, labels, scores)
