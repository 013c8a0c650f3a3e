"""Tests for L2 normalization and the quantile transform."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from landmark_rerank.pyrerank import (
    EmbeddingSet,
    QuantileTransform,
    RerankDimensionError,
    RerankFormatError,
    RerankValidationError,
    apply_quantile_transform,
    fit_quantile_transform,
    l2_normalize,
    load_quantile_transform,
    save_quantile_transform,
)
from landmark_rerank.pyrerank.normalize import (
    CDF_EPSILON,
    QTX_HEADER,
    QTX_MAGIC,
    inverse_normal_cdf,
)

from .conftest import random_set


class TestL2Normalize:
    """Tests for l2_normalize."""

    def test_unit_rows(self, rng: np.random.Generator) -> None:
        """Test every row ends up with unit norm."""
        normalized = l2_normalize(random_set(rng, 20, 7))
        np.testing.assert_allclose(
            np.linalg.norm(normalized.vectors, axis=1), 1.0, atol=1e-6
        )

    def test_zero_row_is_located(self) -> None:
        """Test a zero vector reports its row."""
        embeddings = EmbeddingSet(ids=("a", "b"), vectors=[[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(RerankValidationError, match="row 1"):
            l2_normalize(embeddings)


class TestInverseNormalCdf:
    """Tests for the normal quantile function."""

    def test_known_values(self) -> None:
        """Test a few textbook quantiles."""
        np.testing.assert_allclose(
            inverse_normal_cdf(np.array([0.5, 0.975, 0.025, 0.8413447460685429])),
            [0.0, 1.959963984540054, -1.959963984540054, 1.0],
            atol=1e-8,
        )

    def test_clamped_tails_stay_finite(self) -> None:
        """Test the clamp limits map to about +/-5.2."""
        tails = inverse_normal_cdf(np.array([CDF_EPSILON, 1.0 - CDF_EPSILON]))
        np.testing.assert_allclose(tails, [-5.199337582, 5.199337582], atol=1e-6)

    def test_rejects_closed_interval(self) -> None:
        """Test 0 and 1 have no finite quantile."""
        with pytest.raises(RerankValidationError):
            inverse_normal_cdf(np.array([0.0, 0.5]))


class TestQuantileTransform:
    """Tests for fitting and applying the quantile transform."""

    def test_fit_set_becomes_standard_normal(
        self, rng: np.random.Generator
    ) -> None:
        """Test moments per dimension of the transformed fit set."""
        reference = random_set(rng, 1000, 16)
        transformed = apply_quantile_transform(
            fit_quantile_transform(reference), reference
        ).vectors.astype(np.float64)

        assert np.all(np.abs(transformed.mean(axis=0)) < 0.05)
        std = transformed.std(axis=0)
        assert np.all((std >= 0.9) & (std <= 1.1))

    def test_median_maps_to_zero(self, rng: np.random.Generator) -> None:
        """Test the reference median lands at 0."""
        reference = random_set(rng, 101, 3)
        qt = fit_quantile_transform(reference)
        median = EmbeddingSet(
            ids=("m",), vectors=np.median(reference.vectors, axis=0)[None, :]
        )
        np.testing.assert_allclose(
            apply_quantile_transform(qt, median).vectors, 0.0, atol=1e-6
        )

    def test_monotone_per_dimension(self, rng: np.random.Generator) -> None:
        """Test x <= y implies T(x) <= T(y) on 10^5 random pairs."""
        reference = random_set(rng, 500, 4)
        qt = fit_quantile_transform(reference, n_quantiles=200)
        # include values outside the reference range
        x = rng.standard_normal((100_000, 4)) * 2.0
        y = x + np.abs(rng.standard_normal((100_000, 4))) * 0.1
        ids = tuple(str(i) for i in range(len(x)))
        tx = apply_quantile_transform(qt, EmbeddingSet(ids=ids, vectors=x)).vectors
        ty = apply_quantile_transform(qt, EmbeddingSet(ids=ids, vectors=y)).vectors
        x32 = x.astype(np.float32)
        y32 = y.astype(np.float32)
        assert not np.any((x32 <= y32) & (tx > ty))

    def test_outputs_finite_beyond_range(self, rng: np.random.Generator) -> None:
        """Test far-out values clamp to the tail limit."""
        qt = fit_quantile_transform(random_set(rng, 50, 2))
        far = EmbeddingSet(ids=("lo", "hi"), vectors=[[-1e6, -1e6], [1e6, 1e6]])
        out = apply_quantile_transform(qt, far).vectors
        assert np.isfinite(out).all()
        assert np.all(out[0] < -5.0)
        assert np.all(out[1] > 5.0)

    def test_constant_dimension(self) -> None:
        """Test tied references map to the middle of the run."""
        reference = EmbeddingSet(
            ids=tuple("abcde"),
            vectors=[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0]],
        )
        qt = fit_quantile_transform(reference)
        out = apply_quantile_transform(qt, reference).vectors
        np.testing.assert_allclose(out[:, 0], 0.0, atol=1e-6)

    def test_default_quantile_count(self, rng: np.random.Generator) -> None:
        """Test the default is min(n, 1000)."""
        assert fit_quantile_transform(random_set(rng, 37, 2)).n_quantiles == 37
        assert fit_quantile_transform(random_set(rng, 1200, 2)).n_quantiles == 1000

    def test_fit_needs_two_rows(self, rng: np.random.Generator) -> None:
        """Test a single reference row is rejected."""
        with pytest.raises(RerankValidationError):
            fit_quantile_transform(random_set(rng, 1, 3))

    def test_dimension_mismatch(self, rng: np.random.Generator) -> None:
        """Test applying to another dimension fails."""
        qt = fit_quantile_transform(random_set(rng, 10, 3))
        with pytest.raises(RerankDimensionError):
            apply_quantile_transform(qt, random_set(rng, 2, 4))

    def test_thread_count_does_not_change_output(
        self, rng: np.random.Generator
    ) -> None:
        """Test parallel application is bit-identical."""
        reference = random_set(rng, 9000, 3)
        qt = fit_quantile_transform(reference)
        single = apply_quantile_transform(qt, reference, threads=1)
        multi = apply_quantile_transform(qt, reference, threads=4)
        assert single.identical(multi)


class TestQuantileTransformFile:
    """Tests for transform persistence."""

    def test_round_trip_is_bit_exact(
        self, tmp_path: Path, rng: np.random.Generator
    ) -> None:
        """Test randomized transforms survive save and load unchanged."""
        for case in range(50):
            n = int(rng.integers(2, 60))
            dim = int(rng.integers(1, 9))
            n_quantiles = int(rng.integers(2, 80))
            qt = fit_quantile_transform(random_set(rng, n, dim), n_quantiles)
            path = tmp_path / f"qt_{case}.qtx"

            save_quantile_transform(qt, path)
            loaded = load_quantile_transform(path)

            assert loaded.identical(qt)
            assert (loaded.dim, loaded.n_quantiles) == (dim, n_quantiles)

    def test_bad_magic(self, tmp_path: Path) -> None:
        """Test a wrong magic is rejected."""
        path = tmp_path / "bad.qtx"
        path.write_bytes(QTX_HEADER.pack(b"EMB1", 1, 2) + b"\x00" * 8)
        with pytest.raises(RerankFormatError, match="magic"):
            load_quantile_transform(path)

    def test_decreasing_references(self, tmp_path: Path) -> None:
        """Test a non-monotone table is rejected."""
        path = tmp_path / "bad.qtx"
        payload = np.array([1.0, 0.0], dtype="<f4").tobytes()
        path.write_bytes(QTX_HEADER.pack(QTX_MAGIC, 1, 2) + payload)
        with pytest.raises(RerankFormatError, match="decrease"):
            load_quantile_transform(path)

    def test_model_rejects_single_quantile(self) -> None:
        """Test fewer than 2 quantiles is invalid."""
        with pytest.raises(RerankValidationError):
            QuantileTransform(references=np.zeros((3, 1)))
