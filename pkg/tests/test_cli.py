"""Tests for the command-line front end."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
import voluptuous as vol

from landmark_rerank.cli import exit_code, main
from landmark_rerank.const import EXIT_INTERNAL, EXIT_IO, EXIT_OK, EXIT_VALIDATION
from landmark_rerank.pipeline import PipelineStageError
from landmark_rerank.pyrerank import (
    RerankFormatError,
    RerankIOError,
    load_embeddings,
    load_predictions,
)


def test_synth_writes_model_dir(tmp_path: Path) -> None:
    """Test synth writes a usable model directory."""
    out = tmp_path / "bench"
    code = main(
        [
            "synth",
            str(out),
            "--seed",
            "3",
            "--dim",
            "8",
            "--n-classes",
            "4",
            "--n-test-distractor",
            "10",
            "--class-spread",
            "0.25",
        ]
    )
    assert code == EXIT_OK
    assert {p.name for p in out.iterdir()} == {
        "test.emb",
        "train.emb",
        "nonlandmark.emb",
        "train_labels.csv",
        "test_gt.csv",
    }
    assert load_embeddings(out / "test.emb").dim == 8


def test_rerank_and_eval(
    model_dir: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """Test rerank writes predictions that eval scores."""
    predictions = tmp_path / "pred.csv"
    assert main(["rerank", "--model", str(model_dir), "--out", str(predictions)]) == 0
    assert len(load_predictions(predictions)) == 60

    capsys.readouterr()
    report_path = tmp_path / "eval.json"
    code = main(
        [
            "eval",
            "--predictions",
            str(predictions),
            "--gt",
            str(model_dir / "test_gt.csv"),
            "--report",
            str(report_path),
        ]
    )
    assert code == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads(report_path.read_text())
    assert printed["m_landmarks"] == 20
    assert 0.0 <= printed["gap"] <= 1.0


def test_rank_prints_to_stdout(
    model_dir: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """Test predictions go to stdout without --out."""
    assert main(["-q", "rank", "--model", str(model_dir), "--ensemble", "topk-sum"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "image_id,landmark_id,confidence"
    assert len(lines) == 61


def test_pipeline_threads_identical(model_dir: Path, tmp_path: Path) -> None:
    """Test --threads never changes the predictions bytes."""
    outputs = []
    for threads in ("1", "3"):
        out = tmp_path / f"pred_{threads}.csv"
        code = main(
            [
                "pipeline",
                "--model",
                str(model_dir),
                "--threads",
                threads,
                "--block-size",
                "16",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_pipeline_with_config_file(model_dir: Path, tmp_path: Path) -> None:
    """Test a YAML config with flag overrides, comparison and report."""
    config = tmp_path / "run.yaml"
    config.write_text(
        f"models: [{model_dir}]\n"
        f"gt: {model_dir / 'test_gt.csv'}\n"
        "k_neighbors: 2\n"
        "transform_mode: train_and_nonlandmark_only\n"
    )
    report = tmp_path / "run.json"
    code = main(
        [
            "pipeline",
            "--config",
            str(config),
            "--k-neighbors",
            "4",
            "--no-c-penalty",
            "--compare",
            "--ablation",
            "--report",
            str(report),
            "--out",
            str(tmp_path / "pred.csv"),
        ]
    )
    assert code == EXIT_OK
    data = json.loads(report.read_text())
    assert data["config"]["k_neighbors"] == 4
    assert data["config"]["apply_c"] is False
    assert data["config"]["transform_mode"] == "train_and_nonlandmark_only"
    assert set(data["ablation"]) == {"none", "b_only", "c_only", "b_and_c"}


def test_ingest_csv(tmp_path: Path) -> None:
    """Test CSV embeddings convert to the binary format."""
    source = tmp_path / "set.csv"
    source.write_text("a,1.5,2\nb,-3,0.25\n")
    target = tmp_path / "set.emb"
    assert main(["ingest", str(source), str(target)]) == EXIT_OK
    assert load_embeddings(target).ids == ("a", "b")


class TestExitCodes:
    """Tests for error to exit code mapping."""

    def test_validation_error(self, tmp_path: Path) -> None:
        """Test invalid settings exit with 1."""
        assert main(["rerank", "--model", str(tmp_path), "--k-neighbors", "0"]) == 1

    def test_missing_model(self, tmp_path: Path) -> None:
        """Test a missing model directory exits with 2."""
        assert main(["rerank", "--model", str(tmp_path / "nope")]) == EXIT_IO

    def test_malformed_file(self, tmp_path: Path) -> None:
        """Test malformed input exits with 1."""
        source = tmp_path / "bad.csv"
        source.write_text("a,1\nb,x\n")
        assert main(["ingest", str(source), str(tmp_path / "out.emb")]) == 1

    def test_empty_ground_truth_writes_nothing(
        self, model_dir: Path, tmp_path: Path
    ) -> None:
        """Test ground truth without landmarks exits with 1 and no predictions."""
        gt = tmp_path / "empty_gt.csv"
        gt.write_text("")
        out = tmp_path / "pred.csv"
        code = main(
            ["pipeline", "--model", str(model_dir), "--gt", str(gt), "--out", str(out)]
        )
        assert code == EXIT_VALIDATION
        assert not out.exists()

    def test_usage_error(self) -> None:
        """Test unknown commands exit with 1."""
        assert main(["explode"]) == EXIT_VALIDATION

    def test_help(self) -> None:
        """Test --help exits cleanly."""
        assert main(["--help"]) == EXIT_OK

    def test_mapping(self) -> None:
        """Test stage errors map through their cause."""
        try:
            raise PipelineStageError("load", RerankIOError("x")) from RerankIOError("x")
        except PipelineStageError as err:
            assert exit_code(err) == EXIT_IO
        assert exit_code(RerankFormatError("x")) == EXIT_VALIDATION
        assert exit_code(vol.Invalid("x")) == EXIT_VALIDATION
        assert exit_code(RuntimeError("x")) == EXIT_INTERNAL
