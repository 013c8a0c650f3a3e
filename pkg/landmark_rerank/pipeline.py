"""End-to-end ranking pipeline over one or more model directories."""

from __future__ import annotations

import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

from .config import PipelineConfig
from .const import (
    EMBEDDING_SUFFIXES,
    NONLANDMARK_FILE,
    STAGE_ENSEMBLE,
    STAGE_FILTER,
    STAGE_LOAD,
    STAGE_RANK,
    STAGE_REPORT,
    STAGE_SCORE,
    STAGE_WRITE,
    TEST_FILE,
    TRAIN_FILE,
)
from .diagnostics import build_run_report, write_report
from .pyrerank import (
    EnsembleMode,
    GapReport,
    LabelTable,
    ModelBundle,
    PipelineComparison,
    RankedPrediction,
    RerankParams,
    Role,
    RoleSets,
    baseline_rank,
    compare_pipelines,
    concat_ensemble,
    filter_train_to_test_classes,
    gap,
    load_embeddings,
    load_labels,
    penalty_ablation,
    preprocess_bundle,
    rerank,
    topk_sum_ensemble,
    write_predictions,
)
from .pyrerank.exceptions import RerankError, RerankIOError, RerankValidationError
from .pyrerank.metrics import ABLATIONS

LOG = logging.getLogger(__name__)

ROLE_FILES = {
    Role.TEST: TEST_FILE,
    Role.TRAIN: TRAIN_FILE,
    Role.NONLANDMARK: NONLANDMARK_FILE,
}


class PipelineStageError(RerankError):
    """A pipeline stage failed; the original error is the ``__cause__``."""

    def __init__(self, stage: str, error: BaseException) -> None:
        """Initialize with the failing stage name."""
        self.stage = stage
        super().__init__(f"Stage '{stage}' failed: {error}")


@dataclass
class PipelineResult:
    """Outcome of one pipeline run."""

    predictions: list[RankedPrediction]
    report: GapReport | None = None
    comparison: PipelineComparison | None = None
    ablation: dict[str, GapReport] | None = None
    inputs: dict[str, object] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)


def find_embedding_file(model_dir: Path, stem: str) -> Path:
    """Return ``<stem>.emb`` or ``<stem>.csv`` inside a model directory."""
    for suffix in EMBEDDING_SUFFIXES:
        candidate = model_dir / f"{stem}{suffix}"
        if candidate.is_file():
            return candidate
    names = " or ".join(f"{stem}{suffix}" for suffix in EMBEDDING_SUFFIXES)
    raise RerankIOError(f"No {names} in {model_dir}")


def load_model_dir(model_dir: str | Path) -> RoleSets:
    """Load the three embedding roles of one model."""
    model_dir = Path(model_dir)
    if not model_dir.is_dir():
        raise RerankIOError(f"Model directory not found: {model_dir}")
    sets = {
        role: load_embeddings(find_embedding_file(model_dir, stem), role=role)
        for role, stem in ROLE_FILES.items()
    }
    return RoleSets(
        test=sets[Role.TEST],
        train=sets[Role.TRAIN],
        nonlandmark=sets[Role.NONLANDMARK],
    )


class RerankPipeline:
    """Runs load, filter, ensemble, rank, score, report and write for one config.

    With ``baseline`` set the ranking stage skips both penalties. ``compare``
    and ``ablation`` need ground truth and add extra GAP reports.
    """

    def __init__(
        self,
        config: PipelineConfig,
        *,
        baseline: bool = False,
        compare: bool = False,
        ablation: bool = False,
    ) -> None:
        """Initialize the pipeline."""
        if (compare or ablation) and config.gt is None:
            raise RerankValidationError("Comparison and ablation need ground truth")
        self._config = config
        self._baseline = baseline
        self._compare = compare
        self._ablation = ablation
        self._timings: dict[str, float] = {}

    @property
    def config(self) -> PipelineConfig:
        """Return the pipeline configuration."""
        return self._config

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        """Time a stage and wrap its failures in PipelineStageError."""
        LOG.debug(f"Stage {name} started")
        start = time.perf_counter()
        try:
            yield
        except PipelineStageError:
            raise
        except Exception as err:
            LOG.debug(f"Stage {name} failed: {err}")
            raise PipelineStageError(name, err) from err
        self._timings[name] = time.perf_counter() - start
        LOG.debug(f"Stage {name} finished in {self._timings[name]:.3f}s")

    def run(self) -> PipelineResult:
        """Run every stage and return predictions plus optional scores."""
        config = self._config
        self._timings = {}

        with self._stage(STAGE_LOAD):
            bundle = ModelBundle(tuple(load_model_dir(d) for d in config.models))
            train_labels = load_labels(config.train_labels)
            ground_truth = load_labels(config.gt) if config.gt else None
            if ground_truth is not None and len(ground_truth) == 0:
                raise RerankValidationError(
                    f"Ground truth {config.gt} holds no landmark images"
                )

        if config.filter_train_classes:
            with self._stage(STAGE_FILTER):
                bundle, train_labels = self._filter(bundle, train_labels, ground_truth)

        with self._stage(STAGE_ENSEMBLE):
            features = self._prepare(bundle)

        params = self._params()
        with self._stage(STAGE_RANK):
            predictions = self._rank(features, train_labels, params)

        result = PipelineResult(
            predictions=predictions, inputs=self._describe(bundle, train_labels)
        )
        if ground_truth is not None:
            with self._stage(STAGE_SCORE):
                result.report = gap(predictions, ground_truth)
                if self._compare:
                    result.comparison = self._comparison(
                        features, train_labels, ground_truth
                    )
                if self._ablation:
                    result.ablation = self._ablation_reports(
                        features, train_labels, ground_truth
                    )

        result.timings = dict(self._timings)
        if config.report is not None:
            with self._stage(STAGE_REPORT):
                write_report(build_run_report(config, result), config.report)

        # predictions land only once every other stage has succeeded
        if config.out is not None:
            with self._stage(STAGE_WRITE):
                write_predictions(predictions, config.out)
            result.timings = dict(self._timings)

        LOG.info(
            f"Ranked {len(predictions)} test images with {len(bundle)} model(s), "
            f"ensemble={config.ensemble_mode}"
            + (f", GAP={result.report.gap:.4f}" if result.report else "")
        )
        return result

    def _params(self) -> RerankParams:
        if self._baseline:
            return replace(self._config.params, apply_b=False, apply_c=False)
        return self._config.params

    def _filter(
        self,
        bundle: ModelBundle,
        train_labels: LabelTable,
        ground_truth: LabelTable | None,
    ) -> tuple[ModelBundle, LabelTable]:
        if ground_truth is None:
            raise RerankValidationError("Filtering train classes needs ground truth")
        models = []
        filtered_labels = train_labels
        for model in bundle.models:
            train, filtered_labels = filter_train_to_test_classes(
                model.train, train_labels, ground_truth
            )
            models.append(replace(model, train=train))
        return ModelBundle(tuple(models)), filtered_labels

    def _prepare(self, bundle: ModelBundle) -> RoleSets | ModelBundle:
        """Normalize and transform the models for the configured ensemble."""
        config = self._config
        if config.ensemble_mode is EnsembleMode.CONCAT:
            return concat_ensemble(
                bundle, config.n_quantiles, config.transform_mode, config.threads
            )
        return preprocess_bundle(
            bundle, config.n_quantiles, config.transform_mode, config.threads
        )

    def _rank(
        self,
        features: RoleSets | ModelBundle,
        train_labels: LabelTable,
        params: RerankParams,
    ) -> list[RankedPrediction]:
        config = self._config
        if isinstance(features, ModelBundle):
            return topk_sum_ensemble(
                features,
                train_labels,
                params,
                config.pooled_c,
                block_size=config.block_size,
                threads=config.threads,
            )
        if not (params.apply_b or params.apply_c):
            return baseline_rank(
                features.test,
                features.train,
                train_labels,
                params.k_neighbors,
                block_size=config.block_size,
                threads=config.threads,
            )
        return rerank(
            features.test,
            features.train,
            train_labels,
            features.nonlandmark,
            params,
            block_size=config.block_size,
            threads=config.threads,
        )

    def _comparison(
        self,
        features: RoleSets | ModelBundle,
        train_labels: LabelTable,
        ground_truth: LabelTable,
    ) -> PipelineComparison:
        config = self._config
        if isinstance(features, RoleSets):
            return compare_pipelines(
                features.test,
                features.train,
                train_labels,
                features.nonlandmark,
                ground_truth,
                config.params,
                block_size=config.block_size,
                threads=config.threads,
            )
        plain = replace(config.params, apply_b=False, apply_c=False)
        baseline = gap(self._rank(features, train_labels, plain), ground_truth)
        reranked = gap(self._rank(features, train_labels, config.params), ground_truth)
        return PipelineComparison(baseline=baseline, reranked=reranked)

    def _ablation_reports(
        self,
        features: RoleSets | ModelBundle,
        train_labels: LabelTable,
        ground_truth: LabelTable,
    ) -> dict[str, GapReport]:
        config = self._config
        if isinstance(features, RoleSets):
            return penalty_ablation(
                features.test,
                features.train,
                train_labels,
                features.nonlandmark,
                ground_truth,
                config.params,
                block_size=config.block_size,
                threads=config.threads,
            )
        return {
            name: gap(
                self._rank(
                    features,
                    train_labels,
                    replace(config.params, apply_b=apply_b, apply_c=apply_c),
                ),
                ground_truth,
            )
            for name, (apply_b, apply_c) in ABLATIONS.items()
        }

    @staticmethod
    def _describe(bundle: ModelBundle, train_labels: LabelTable) -> dict[str, object]:
        first = bundle.models[0]
        return {
            "n_models": len(bundle),
            "dims": list(bundle.dims),
            "n_test": len(first.test),
            "n_train": len(first.train),
            "n_nonlandmark": len(first.nonlandmark),
            "n_train_classes": len(train_labels.landmark_ids()),
        }


def run_pipeline(
    config: PipelineConfig,
    *,
    baseline: bool = False,
    compare: bool = False,
    ablation: bool = False,
) -> PipelineResult:
    """Build a RerankPipeline for ``config`` and run it."""
    return RerankPipeline(
        config, baseline=baseline, compare=compare, ablation=ablation
    ).run()

