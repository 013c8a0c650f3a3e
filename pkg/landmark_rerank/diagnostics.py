"""Run diagnostics and JSON reports for the landmark re-ranking pipeline."""

from __future__ import annotations

import json
import os
import platform
from typing import TYPE_CHECKING, Any

import numpy as np

from .const import DOMAIN, VERSION
from .pyrerank import GapReport
from .pyrerank.embedding_store import atomic_write

if TYPE_CHECKING:
    from .config import PipelineConfig
    from .pipeline import PipelineResult


def environment() -> dict[str, Any]:
    """Return versions that affect numeric results."""
    return {
        "package": DOMAIN,
        "version": VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def prediction_summary(result: PipelineResult) -> dict[str, Any]:
    """Summarize the confidence distribution of a run."""
    confidences = np.array([p.confidence for p in result.predictions], dtype=np.float64)
    summary: dict[str, Any] = {"n_predictions": int(confidences.size)}
    if confidences.size:
        summary.update(
            {
                "confidence_min": float(confidences.min()),
                "confidence_median": float(np.median(confidences)),
                "confidence_max": float(confidences.max()),
                "n_landmarks_predicted": len(
                    {p.landmark_id for p in result.predictions}
                ),
            }
        )
    return summary


def build_run_report(config: PipelineConfig, result: PipelineResult) -> dict[str, Any]:
    """Return the JSON-ready report of a pipeline run."""
    report: dict[str, Any] = {
        "environment": environment(),
        "config": config.to_dict(),
        "inputs": dict(result.inputs),
        "predictions": prediction_summary(result),
        "timings": {name: round(seconds, 6) for name, seconds in result.timings.items()},
    }

    # scores only exist when ground truth was given
    if result.report is not None:
        report["gap"] = result.report.to_dict()
    if result.comparison is not None:
        report["comparison"] = result.comparison.to_dict()
    if result.ablation is not None:
        report["ablation"] = {
            name: gap_report.to_dict() for name, gap_report in result.ablation.items()
        }

    return report


def build_eval_report(
    report: GapReport, predictions: str | os.PathLike, ground_truth: str | os.PathLike
) -> dict[str, Any]:
    """Return the report of scoring a predictions file."""
    return {
        **report.to_dict(),
        "predictions_file": str(predictions),
        "ground_truth_file": str(ground_truth),
    }


def format_report(data: dict[str, Any]) -> str:
    """Render a report as stable, indented JSON."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_report(data: dict[str, Any], path: str | os.PathLike) -> None:
    """Write a report atomically."""
    atomic_write(path, format_report(data).encode("utf-8"))
