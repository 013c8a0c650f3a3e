"""Landmark recognition ranking with non-landmark re-ranking."""

from __future__ import annotations

import logging

from .config import PipelineConfig, build_config, load_config_file
from .const import DOMAIN as DOMAIN
from .const import VERSION
from .pipeline import (
    PipelineResult,
    PipelineStageError,
    RerankPipeline,
    load_model_dir,
    run_pipeline,
)

LOG = logging.getLogger(__name__)
LOG.addHandler(logging.NullHandler())

__version__ = VERSION

__all__ = [
    "DOMAIN",
    "PipelineConfig",
    "PipelineResult",
    "PipelineStageError",
    "RerankPipeline",
    "build_config",
    "load_config_file",
    "load_model_dir",
    "run_pipeline",
]
