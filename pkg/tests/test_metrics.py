"""Tests for GAP scoring and pipeline comparison."""

from __future__ import annotations

import numpy as np
import pytest

from landmark_rerank.pyrerank import (
    EmbeddingSet,
    LabelTable,
    RankedPrediction,
    RerankParams,
    RerankValidationError,
    SynthInstance,
    compare_pipelines,
    gap,
    penalty_ablation,
)

GROUND_TRUTH = LabelTable({"a": 1, "b": 2, "c": 3})
RANDOM_TRUTH = LabelTable({f"img_{i}": i % 5 for i in range(0, 60, 2)})


def random_predictions(rng: np.random.Generator) -> list[RankedPrediction]:
    """Return 60 predictions with random labels and confidences."""
    confidences = rng.uniform(-1.0, 1.0, size=60)
    labels = rng.integers(0, 5, size=60)
    return [
        RankedPrediction(f"img_{i}", int(labels[i]), float(confidences[i]))
        for i in range(60)
    ]


class TestGap:
    """Tests for Global Average Precision."""

    def test_all_correct(self) -> None:
        """Test a perfect list scores 1."""
        predictions = [
            RankedPrediction("a", 1, 0.9),
            RankedPrediction("b", 2, 0.5),
            RankedPrediction("c", 3, 0.1),
        ]
        assert gap(predictions, GROUND_TRUTH).gap == 1.0

    def test_correct_wrong_correct(self) -> None:
        """Test [correct, wrong, correct] with M = 2."""
        truth = LabelTable({"a": 1, "c": 3})
        predictions = [
            RankedPrediction("a", 1, 0.9),
            RankedPrediction("b", 7, 0.8),
            RankedPrediction("c", 3, 0.7),
        ]
        report = gap(predictions, truth, include_ranks=True)
        assert report.gap == pytest.approx((1.0 + 2.0 / 3.0) / 2.0, abs=1e-12)
        assert report.m_landmarks == 2
        assert report.correct_at_rank == (True, False, True)

    def test_missing_landmarks_count_in_m(self) -> None:
        """Test unpredicted landmark images lower the score."""
        predictions = [RankedPrediction("a", 1, 0.9)]
        assert gap(predictions, GROUND_TRUTH).gap == pytest.approx(1.0 / 3.0)

    def test_empty_prediction_list(self) -> None:
        """Test no predictions score 0."""
        assert gap([], GROUND_TRUTH).gap == 0.0

    def test_ties_break_by_image_id(self) -> None:
        """Test equal confidences are ordered by ascending image id."""
        truth = LabelTable({"b": 2})
        predictions = [RankedPrediction("b", 2, 0.5), RankedPrediction("a", 9, 0.5)]
        # "a" (wrong) ranks first, so the correct one sits at rank 2
        assert gap(predictions, truth).gap == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(10))
    def test_invariant_to_monotone_transforms(self, seed: int) -> None:
        """Test strictly increasing maps of confidences keep the score."""
        predictions = random_predictions(np.random.default_rng(seed))
        for transform in (lambda c: np.exp(3.0 * c), lambda c: 2.0 * c + 5.0):
            transformed = [
                RankedPrediction(
                    p.image_id, p.landmark_id, float(transform(p.confidence))
                )
                for p in predictions
            ]
            expected = gap(predictions, RANDOM_TRUTH).gap
            assert gap(transformed, RANDOM_TRUTH).gap == expected

    def test_dropping_last_wrong_prediction_never_hurts(
        self, rng: np.random.Generator
    ) -> None:
        """Test removing the lowest-ranked incorrect prediction never lowers GAP."""
        for _ in range(200):
            predictions = random_predictions(rng)
            ordered = sorted(predictions, key=lambda p: (-p.confidence, p.image_id))
            wrong = [
                p for p in ordered if RANDOM_TRUTH.get(p.image_id) != p.landmark_id
            ]
            if not wrong:
                continue
            kept = [p for p in predictions if p is not wrong[-1]]
            assert gap(kept, RANDOM_TRUTH).gap >= gap(predictions, RANDOM_TRUTH).gap

    def test_duplicate_prediction(self) -> None:
        """Test two predictions for one image are rejected."""
        predictions = [RankedPrediction("a", 1, 0.9), RankedPrediction("a", 2, 0.8)]
        with pytest.raises(RerankValidationError, match="More than one"):
            gap(predictions, GROUND_TRUTH)

    def test_no_landmarks(self) -> None:
        """Test M = 0 is rejected."""
        with pytest.raises(RerankValidationError, match="no landmark"):
            gap([RankedPrediction("a", 1, 0.9)], LabelTable({}))

    def test_report_dict(self) -> None:
        """Test the JSON fields."""
        report = gap([RankedPrediction("a", 1, 0.9)], GROUND_TRUTH, include_ranks=True)
        assert report.to_dict() == {
            "gap": pytest.approx(1.0 / 3.0),
            "m_landmarks": 3,
            "n_predictions": 1,
        }


class TestComparison:
    """Tests for baseline/rerank comparison and ablation."""

    def test_compare_pipelines(self, small_instance: SynthInstance) -> None:
        """Test both reports share M and the delta is their difference."""
        inst = small_instance
        comparison = compare_pipelines(
            inst.test,
            inst.train,
            inst.train_labels,
            inst.nonlandmark,
            inst.test_gt,
            RerankParams(),
        )
        assert comparison.baseline.m_landmarks == comparison.reranked.m_landmarks
        assert comparison.delta == pytest.approx(
            comparison.reranked.gap - comparison.baseline.gap
        )
        assert set(comparison.to_dict()) == {"baseline", "reranked", "delta"}

    def test_ablation_covers_all_combinations(
        self, small_instance: SynthInstance
    ) -> None:
        """Test the four penalty combinations; none equals the baseline."""
        inst = small_instance
        args = (inst.test, inst.train, inst.train_labels, inst.nonlandmark, inst.test_gt)
        reports = penalty_ablation(*args, RerankParams())
        comparison = compare_pipelines(*args, RerankParams())

        assert list(reports) == ["none", "b_only", "c_only", "b_and_c"]
        assert reports["none"].gap == comparison.baseline.gap
        assert reports["b_and_c"].gap == comparison.reranked.gap

    def test_empty_pool_gives_equal_reports(
        self, small_instance: SynthInstance
    ) -> None:
        """Test without non-landmark images both pipelines score the same."""
        inst = small_instance
        comparison = compare_pipelines(
            inst.test,
            inst.train,
            inst.train_labels,
            EmbeddingSet.empty(inst.test.dim),
            inst.test_gt,
            RerankParams(),
        )
        assert comparison.baseline == comparison.reranked
        assert comparison.delta == 0.0

    def test_orthogonal_pool_changes_nothing(self, rng: np.random.Generator) -> None:
        """Test a pool orthogonal to every image leaves GAP unchanged."""
        test = EmbeddingSet(
            ids=tuple(f"q_{i}" for i in range(12)),
            vectors=np.hstack([rng.uniform(0.1, 1.0, (12, 4)), np.zeros((12, 2))]),
        )
        train = EmbeddingSet(
            ids=tuple(f"t_{i}" for i in range(20)),
            vectors=np.hstack([rng.uniform(0.1, 1.0, (20, 4)), np.zeros((20, 2))]),
        )
        pool = EmbeddingSet(
            ids=("n_0", "n_1", "n_2"),
            vectors=[[0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 0, 1], [0, 0, 0, 0, 1, 1]],
        )
        train_labels = LabelTable({image_id: i % 3 for i, image_id in enumerate(train.ids)})
        # every test image is a landmark
        truth = LabelTable({image_id: i % 3 for i, image_id in enumerate(test.ids)})

        comparison = compare_pipelines(
            test, train, train_labels, pool, truth, RerankParams()
        )
        assert abs(comparison.delta) <= 1e-9
