"""Seeded synthetic landmark benchmark.

Random numbers come from numpy's ``Generator(PCG64(seed))``. The instance
has the structure the re-ranker exploits:

- landmark classes are points on the unit sphere; train exemplars and
  landmark test images are class centroid plus isotropic Gaussian noise;
- distractor test images and the non-landmark pool share a separate set of
  distractor clusters, so distractors resemble the pool;
- a ``distractor_overlap`` fraction of the distractor clusters also leak into
  the train set, each as ``contaminated_per_cluster`` exemplars filed under
  one random landmark class. Those make the
  plain kNN baseline confident on distractors, and they are exactly what
  the train penalty suppresses.

Noise has per-coordinate standard deviation ``class_spread / sqrt(dim)``,
so its norm is about ``class_spread``.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np

from .embedding_store import save_embeddings, save_labels
from .models import EmbeddingSet, LabelTable, Role, SynthConfig, SynthInstance

LOG = logging.getLogger(__name__)

TEST_PREFIX = "test"
TRAIN_PREFIX = "train"
NONLANDMARK_PREFIX = "nonlandmark"


def _unit_sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    points = rng.standard_normal((n, dim))
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def _around(
    rng: np.random.Generator, centroids: np.ndarray, spread: float
) -> np.ndarray:
    dim = centroids.shape[1]
    noise = rng.standard_normal(centroids.shape) * (spread / np.sqrt(dim))
    return centroids + noise


def _ids(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}_{i:05d}" for i in range(n))


def generate(config: SynthConfig) -> SynthInstance:
    """Generate a benchmark instance; identical configs give identical output."""
    rng = np.random.Generator(np.random.PCG64(config.seed))

    class_centroids = _unit_sphere(rng, config.n_classes, config.dim)
    cluster_centroids = _unit_sphere(rng, config.n_distractor_clusters, config.dim)

    # train: clean exemplars per class, then leaked distractor exemplars
    clean_labels = np.repeat(np.arange(config.n_classes), config.train_per_class)
    n_leaking = int(round(config.distractor_overlap * config.n_distractor_clusters))
    leaking = rng.permutation(config.n_distractor_clusters)[:n_leaking]
    leaking = np.sort(leaking)
    # every leaked cluster is filed under a single landmark class
    cluster_labels = rng.integers(0, config.n_classes, size=leaking.size)
    leaked_clusters = np.repeat(leaking, config.contaminated_per_cluster)
    leaked_labels = np.repeat(cluster_labels, config.contaminated_per_cluster)

    train_vectors = np.vstack(
        (
            _around(rng, class_centroids[clean_labels], config.class_spread),
            _around(rng, cluster_centroids[leaked_clusters], config.class_spread),
        )
    )
    train_labels = np.concatenate((clean_labels, leaked_labels))

    # test: landmark images and distractors, shuffled together
    landmark_classes = rng.integers(0, config.n_classes, size=config.n_test_landmark)
    distractor_clusters = rng.integers(
        0, config.n_distractor_clusters, size=config.n_test_distractor
    )
    test_vectors = np.vstack(
        (
            _around(rng, class_centroids[landmark_classes], config.class_spread),
            _around(rng, cluster_centroids[distractor_clusters], config.class_spread),
        )
    )
    test_truth = np.concatenate(
        (landmark_classes, np.full(config.n_test_distractor, -1, dtype=np.int64))
    )
    order = rng.permutation(len(test_vectors))
    test_vectors = test_vectors[order]
    test_truth = test_truth[order]

    pool_clusters = rng.integers(
        0, config.n_distractor_clusters, size=config.n_nonlandmark_pool
    )
    pool_vectors = _around(rng, cluster_centroids[pool_clusters], config.class_spread)

    test_ids = _ids(TEST_PREFIX, len(test_vectors))
    train_ids = _ids(TRAIN_PREFIX, len(train_vectors))

    instance = SynthInstance(
        test=EmbeddingSet(
            ids=test_ids,
            vectors=test_vectors.reshape(-1, config.dim),
            role=Role.TEST,
        ),
        train=EmbeddingSet(ids=train_ids, vectors=train_vectors, role=Role.TRAIN),
        nonlandmark=EmbeddingSet(
            ids=_ids(NONLANDMARK_PREFIX, config.n_nonlandmark_pool),
            vectors=pool_vectors.reshape(-1, config.dim),
            role=Role.NONLANDMARK,
        ),
        train_labels=LabelTable(
            {i: int(label) for i, label in zip(train_ids, train_labels, strict=True)}
        ),
        test_gt=LabelTable(
            {
                i: int(label)
                for i, label in zip(test_ids, test_truth, strict=True)
                if label >= 0
            }
        ),
    )
    LOG.debug(
        f"Generated synthetic instance: seed={config.seed}, "
        f"test={len(instance.test)} ({len(instance.test_gt)} landmarks), "
        f"train={len(instance.train)} ({leaked_clusters.size} leaked), "
        f"pool={len(instance.nonlandmark)}"
    )
    return instance


def write_instance(
    instance: SynthInstance,
    out_dir: str | os.PathLike,
    test_file: str = "test.emb",
    train_file: str = "train.emb",
    nonlandmark_file: str = "nonlandmark.emb",
    train_labels_file: str = "train_labels.csv",
    test_gt_file: str = "test_gt.csv",
) -> list[Path]:
    """Write the five benchmark files into ``out_dir``."""
    out = Path(out_dir)
    paths = [
        out / test_file,
        out / train_file,
        out / nonlandmark_file,
        out / train_labels_file,
        out / test_gt_file,
    ]
    save_embeddings(instance.test, paths[0])
    save_embeddings(instance.train, paths[1])
    save_embeddings(instance.nonlandmark, paths[2])
    save_labels(instance.train_labels, paths[3])
    save_labels(instance.test_gt, paths[4])
    return paths
