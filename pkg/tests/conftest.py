"""Pytest fixtures for landmark re-ranking tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from landmark_rerank.const import (
    NONLANDMARK_FILE,
    TEST_FILE,
    TEST_GT_FILE,
    TRAIN_FILE,
    TRAIN_LABELS_FILE,
)
from landmark_rerank.pyrerank import (
    EmbeddingSet,
    LabelTable,
    Role,
    SynthConfig,
    SynthInstance,
    generate,
    write_instance,
)

MOCK_SEED = 1234
MOCK_DIM = 4

SMALL_SYNTH = SynthConfig(
    seed=42,
    dim=16,
    n_classes=8,
    train_per_class=5,
    n_test_landmark=20,
    n_test_distractor=40,
    n_nonlandmark_pool=30,
    n_distractor_clusters=6,
    contaminated_per_cluster=3,
)


def random_set(
    rng: np.random.Generator,
    n: int,
    dim: int,
    prefix: str = "img",
    role: Role | None = None,
) -> EmbeddingSet:
    """Return n Gaussian rows with ids ``<prefix>_<i>``."""
    return EmbeddingSet(
        ids=tuple(f"{prefix}_{i}" for i in range(n)),
        vectors=rng.standard_normal((n, dim)).astype(np.float32),
        role=role,
    )


def write_model_dir(instance: SynthInstance, out_dir: Path) -> Path:
    """Write a synthetic instance laid out as a model directory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    write_instance(
        instance,
        out_dir,
        test_file=f"{TEST_FILE}.emb",
        train_file=f"{TRAIN_FILE}.emb",
        nonlandmark_file=f"{NONLANDMARK_FILE}.emb",
        train_labels_file=TRAIN_LABELS_FILE,
        test_gt_file=TEST_GT_FILE,
    )
    return out_dir


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded random generator."""
    return np.random.default_rng(MOCK_SEED)


@pytest.fixture
def toy_sets() -> tuple[EmbeddingSet, EmbeddingSet, EmbeddingSet, LabelTable]:
    """Return a hand-built test/train/non-landmark scenario.

    Train rows 0-1 are landmark 1 near e0, rows 2-3 landmark 2 near e1, and
    row 4 is a landmark 3 exemplar lying in the non-landmark region (e2).
    """
    train = EmbeddingSet(
        ids=("t0", "t1", "t2", "t3", "t4"),
        vectors=np.array(
            [
                [1.0, 0.1, 0.0, 0.0],
                [1.0, 0.0, 0.1, 0.0],
                [0.1, 1.0, 0.0, 0.0],
                [0.0, 1.0, 0.1, 0.0],
                [0.0, 0.0, 1.0, 0.1],
            ]
        ),
        role=Role.TRAIN,
    )
    test = EmbeddingSet(
        ids=("q_landmark", "q_distractor"),
        vectors=np.array([[1.0, 0.05, 0.0, 0.0], [0.0, 0.05, 1.0, 0.0]]),
        role=Role.TEST,
    )
    nonlandmark = EmbeddingSet(
        ids=("n0", "n1", "n2"),
        vectors=np.array(
            [[0.0, 0.0, 1.0, 0.0], [0.0, 0.1, 1.0, 0.0], [0.0, 0.0, 1.0, 0.2]]
        ),
        role=Role.NONLANDMARK,
    )
    labels = LabelTable({"t0": 1, "t1": 1, "t2": 2, "t3": 2, "t4": 3})
    return test, train, nonlandmark, labels


@pytest.fixture
def small_instance() -> SynthInstance:
    """Return a small synthetic benchmark."""
    return generate(SMALL_SYNTH)


@pytest.fixture
def model_dir(tmp_path: Path, small_instance: SynthInstance) -> Path:
    """Return a model directory holding the small benchmark."""
    return write_model_dir(small_instance, tmp_path / "model_a")
