"""Data models for embedding sets, rankings and evaluation reports."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from types import MappingProxyType

import numpy as np

from .exceptions import RerankDimensionError, RerankValidationError


class Role(StrEnum):
    """Which dataset an embedding set plays in the re-ranking scheme."""

    TEST = "test"
    TRAIN = "train"
    NONLANDMARK = "nonlandmark"


class TransformMode(StrEnum):
    """Which roles receive the test-fitted quantile transform."""

    ALL_ROLES = "all_roles"
    TRAIN_AND_NONLANDMARK_ONLY = "train_and_nonlandmark_only"


class EnsembleMode(StrEnum):
    """How embeddings from several models are combined."""

    CONCAT = "concat"
    TOPK_SUM = "topk_sum"


class PooledC(StrEnum):
    """How the test penalty C is pooled across models in the top-k sum."""

    MEAN = "mean"
    OFF = "off"


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Ordered image ids with one float32 embedding row per id."""

    ids: tuple[str, ...]
    vectors: np.ndarray
    role: Role | None = None

    def __post_init__(self) -> None:
        """Validate and freeze the embedding matrix."""
        ids = tuple(self.ids)
        vectors = np.array(self.vectors, dtype=np.float32, order="C", copy=True)

        if vectors.ndim != 2:
            raise RerankDimensionError(
                f"Embedding matrix must be 2-D, got shape {vectors.shape}"
            )
        if vectors.shape[1] < 1:
            raise RerankDimensionError("Embedding dimension must be at least 1")
        if vectors.shape[0] != len(ids):
            raise RerankDimensionError(
                f"{vectors.shape[0]} embedding rows for {len(ids)} ids"
            )

        seen: dict[str, int] = {}
        for row, image_id in enumerate(ids):
            if image_id in seen:
                raise RerankValidationError(
                    f"Duplicate image id {image_id!r} at row {row} "
                    f"(first seen at row {seen[image_id]})"
                )
            seen[image_id] = row

        finite = np.isfinite(vectors)
        if not finite.all():
            row, col = np.argwhere(~finite)[0]
            raise RerankValidationError(
                f"Non-finite embedding value at row {row}, column {col}"
            )

        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "vectors", _readonly(vectors))

    @property
    def dim(self) -> int:
        """Return the embedding dimension."""
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        """Return the number of rows."""
        return len(self.ids)

    def subset(self, rows: Sequence[int] | np.ndarray) -> EmbeddingSet:
        """Return the given rows, in the given order."""
        rows = np.asarray(rows, dtype=np.int64)
        return EmbeddingSet(
            ids=tuple(self.ids[i] for i in rows),
            vectors=self.vectors[rows].reshape(len(rows), self.dim),
            role=self.role,
        )

    def with_vectors(self, vectors: np.ndarray) -> EmbeddingSet:
        """Return a set with the same ids and role but new vectors."""
        return EmbeddingSet(ids=self.ids, vectors=vectors, role=self.role)

    def identical(self, other: EmbeddingSet) -> bool:
        """Return True when ids and vectors match bit for bit."""
        return (
            self.ids == other.ids
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
        )

    @classmethod
    def empty(cls, dim: int, role: Role | None = None) -> EmbeddingSet:
        """Return an empty set of the given dimension."""
        return cls(ids=(), vectors=np.zeros((0, dim), dtype=np.float32), role=role)


@dataclass(frozen=True)
class LabelTable:
    """Mapping from image id to landmark id."""

    entries: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate landmark ids and freeze the mapping."""
        frozen: dict[str, int] = {}
        for image_id, landmark_id in self.entries.items():
            if isinstance(landmark_id, bool) or not isinstance(
                landmark_id, int | np.integer
            ):
                raise RerankValidationError(
                    f"Landmark id for {image_id!r} is not an integer: {landmark_id!r}"
                )
            if landmark_id < 0:
                raise RerankValidationError(
                    f"Landmark id for {image_id!r} is negative: {landmark_id}"
                )
            frozen[image_id] = int(landmark_id)
        object.__setattr__(self, "entries", MappingProxyType(frozen))

    def __len__(self) -> int:
        """Return the number of labeled images."""
        return len(self.entries)

    def __contains__(self, image_id: object) -> bool:
        """Return True when the image id has a label."""
        return image_id in self.entries

    def get(self, image_id: str) -> int | None:
        """Return the landmark id of an image, or None."""
        return self.entries.get(image_id)

    def landmark_ids(self) -> frozenset[int]:
        """Return the distinct landmark ids."""
        return frozenset(self.entries.values())

    def lookup(self, ids: Iterable[str]) -> np.ndarray:
        """Return landmark ids aligned with ``ids``, -1 where unlabeled."""
        return np.array([self.entries.get(i, -1) for i in ids], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class QuantileTransform:
    """Per-dimension empirical quantiles mapped onto the standard normal."""

    references: np.ndarray

    def __post_init__(self) -> None:
        """Validate and freeze the reference quantiles."""
        references = np.array(self.references, dtype=np.float32, order="C", copy=True)
        if references.ndim != 2 or references.shape[0] < 1:
            raise RerankDimensionError(
                f"Quantile references must be (dim, n_quantiles), got {references.shape}"
            )
        if references.shape[1] < 2:
            raise RerankValidationError("At least 2 quantiles are required")
        if not np.isfinite(references).all():
            raise RerankValidationError("Quantile references must be finite")
        steps = np.diff(references, axis=1)
        if (steps < 0).any():
            dim = int(np.argwhere(steps < 0)[0][0])
            raise RerankValidationError(
                f"Quantile references decrease in dimension {dim}"
            )
        object.__setattr__(self, "references", _readonly(references))

    @property
    def dim(self) -> int:
        """Return the number of dimensions."""
        return int(self.references.shape[0])

    @property
    def n_quantiles(self) -> int:
        """Return the number of quantile levels."""
        return int(self.references.shape[1])

    @property
    def levels(self) -> np.ndarray:
        """Return the evenly spaced probability levels."""
        return np.linspace(0.0, 1.0, self.n_quantiles)

    def identical(self, other: QuantileTransform) -> bool:
        """Return True when the references match bit for bit."""
        return (
            self.references.shape == other.references.shape
            and self.references.tobytes() == other.references.tobytes()
        )


@dataclass(frozen=True, eq=False)
class TopKResult:
    """Per-query neighbors sorted by score, ties by ascending corpus index."""

    k: int
    indices: np.ndarray  # (n_queries, width) int64
    scores: np.ndarray  # (n_queries, width) float64

    def __post_init__(self) -> None:
        """Freeze the neighbor arrays."""
        if self.k < 1:
            raise RerankValidationError(f"k must be at least 1, got {self.k}")
        indices = np.array(self.indices, dtype=np.int64, copy=True)
        scores = np.array(self.scores, dtype=np.float64, copy=True)
        if indices.shape != scores.shape or indices.ndim != 2:
            raise RerankDimensionError(
                f"Index and score arrays disagree: {indices.shape} vs {scores.shape}"
            )
        object.__setattr__(self, "indices", _readonly(indices))
        object.__setattr__(self, "scores", _readonly(scores))

    @property
    def n_queries(self) -> int:
        """Return the number of query rows."""
        return int(self.indices.shape[0])

    @property
    def width(self) -> int:
        """Return the neighbors kept per query, min(k, corpus size)."""
        return int(self.indices.shape[1])

    def neighbors(self, row: int) -> list[tuple[int, float]]:
        """Return the (corpus index, score) pairs of one query."""
        return [
            (int(i), float(s))
            for i, s in zip(self.indices[row], self.scores[row], strict=True)
        ]


@dataclass(frozen=True)
class RerankParams:
    """Neighborhood sizes and penalty switches for re-ranking."""

    k_neighbors: int = 3
    k_train_penalty: int = 5
    k_test_penalty: int = 10
    apply_b: bool = True
    apply_c: bool = True

    def __post_init__(self) -> None:
        """Validate neighborhood sizes."""
        for name in ("k_neighbors", "k_train_penalty", "k_test_penalty"):
            value = getattr(self, name)
            if value < 1:
                raise RerankValidationError(f"{name} must be at least 1, got {value}")


@dataclass(frozen=True)
class RankedPrediction:
    """One landmark prediction for one image."""

    image_id: str
    landmark_id: int
    confidence: float

    def __post_init__(self) -> None:
        """Validate the prediction."""
        if self.landmark_id < 0:
            raise RerankValidationError(
                f"Negative landmark id {self.landmark_id} for {self.image_id!r}"
            )
        if not math.isfinite(self.confidence):
            raise RerankValidationError(
                f"Non-finite confidence for {self.image_id!r}: {self.confidence}"
            )


@dataclass(frozen=True)
class GapReport:
    """Global Average Precision of a prediction list."""

    gap: float
    m_landmarks: int
    n_predictions: int
    correct_at_rank: tuple[bool, ...] | None = None

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON output."""
        return {
            "gap": self.gap,
            "m_landmarks": self.m_landmarks,
            "n_predictions": self.n_predictions,
        }


@dataclass(frozen=True)
class PipelineComparison:
    """GAP of the unpenalized baseline next to the re-ranked predictions."""

    baseline: GapReport
    reranked: GapReport

    @property
    def delta(self) -> float:
        """Return the GAP gained by re-ranking."""
        return self.reranked.gap - self.baseline.gap

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON output."""
        return {
            "baseline": self.baseline.to_dict(),
            "reranked": self.reranked.to_dict(),
            "delta": self.delta,
        }


@dataclass(frozen=True)
class RoleSets:
    """The test, train and non-landmark embeddings of one model."""

    test: EmbeddingSet
    train: EmbeddingSet
    nonlandmark: EmbeddingSet

    def __iter__(self):
        """Iterate over (role, set) pairs."""
        yield Role.TEST, self.test
        yield Role.TRAIN, self.train
        yield Role.NONLANDMARK, self.nonlandmark

    @property
    def dim(self) -> int:
        """Return the shared dimension of the three roles."""
        return self.test.dim

    def check_dims(self) -> None:
        """Raise unless all three roles share one dimension."""
        dims = {role: s.dim for role, s in self}
        if len(set(dims.values())) != 1:
            raise RerankDimensionError(f"Role dimensions differ: {dims}")


@dataclass(frozen=True)
class ModelBundle:
    """Embeddings of the same images from one or more models."""

    models: tuple[RoleSets, ...]

    def __post_init__(self) -> None:
        """Validate that all models describe the same images."""
        models = tuple(self.models)
        if not models:
            raise RerankValidationError("A model bundle needs at least one model")
        for model in models:
            model.check_dims()
        first = models[0]
        for m, model in enumerate(models[1:], start=1):
            for (role, ref), (_, other) in zip(first, model, strict=True):
                if ref.ids != other.ids:
                    raise RerankValidationError(
                        f"Model {m} {role} ids differ from model 0"
                    )
        object.__setattr__(self, "models", models)

    def __len__(self) -> int:
        """Return the number of models."""
        return len(self.models)

    @property
    def dims(self) -> tuple[int, ...]:
        """Return the per-model embedding dimensions."""
        return tuple(model.dim for model in self.models)


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic landmark benchmark."""

    seed: int = 42
    dim: int = 64
    n_classes: int = 50
    train_per_class: int = 20
    n_test_landmark: int = 100
    n_test_distractor: int = 900
    n_nonlandmark_pool: int = 500
    class_spread: float = 0.3
    distractor_overlap: float = 0.5
    n_distractor_clusters: int = 25
    contaminated_per_cluster: int = 5

    def __post_init__(self) -> None:
        """Validate the configuration."""
        if self.dim < 2:
            raise RerankValidationError(f"dim must be at least 2, got {self.dim}")
        for name in ("n_classes", "train_per_class", "n_distractor_clusters"):
            if getattr(self, name) < 1:
                raise RerankValidationError(f"{name} must be positive")
        for name in (
            "n_test_landmark",
            "n_test_distractor",
            "n_nonlandmark_pool",
            "contaminated_per_cluster",
        ):
            if getattr(self, name) < 0:
                raise RerankValidationError(f"{name} must be non-negative")
        if not self.class_spread > 0:
            raise RerankValidationError("class_spread must be positive")
        if not 0.0 <= self.distractor_overlap <= 1.0:
            raise RerankValidationError("distractor_overlap must lie in [0, 1]")


@dataclass(frozen=True)
class SynthInstance:
    """A generated benchmark with its ground truth."""

    test: EmbeddingSet
    train: EmbeddingSet
    nonlandmark: EmbeddingSet
    train_labels: LabelTable
    test_gt: LabelTable

    @property
    def roles(self) -> RoleSets:
        """Return the three embedding sets as one model."""
        return RoleSets(test=self.test, train=self.train, nonlandmark=self.nonlandmark)
