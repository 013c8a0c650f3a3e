"""Pipeline configuration: schema, YAML loading and command-line overrides."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import voluptuous as vol
import yaml

from .const import (
    CONF_APPLY_B,
    CONF_APPLY_C,
    CONF_BLOCK_SIZE,
    CONF_ENSEMBLE_MODE,
    CONF_FILTER_TRAIN_CLASSES,
    CONF_GT,
    CONF_K_NEIGHBORS,
    CONF_K_TEST_PENALTY,
    CONF_K_TRAIN_PENALTY,
    CONF_MODELS,
    CONF_N_QUANTILES,
    CONF_OUT,
    CONF_POOLED_C,
    CONF_REPORT,
    CONF_THREADS,
    CONF_TRAIN_LABELS,
    CONF_TRANSFORM_MODE,
    DEFAULT_BLOCK_SIZE,
    DEFAULT_ENSEMBLE_MODE,
    DEFAULT_K_NEIGHBORS,
    DEFAULT_K_TEST_PENALTY,
    DEFAULT_K_TRAIN_PENALTY,
    DEFAULT_N_QUANTILES,
    DEFAULT_POOLED_C,
    DEFAULT_THREADS,
    DEFAULT_TRANSFORM_MODE,
    MAX_THREADS,
    TRAIN_LABELS_FILE,
)
from .pyrerank import (
    EnsembleMode,
    PooledC,
    RerankParams,
    TransformMode,
)
from .pyrerank.embedding_store import read_text
from .pyrerank.exceptions import RerankFormatError, RerankValidationError

LOG = logging.getLogger(__name__)

PATH_KEYS = (CONF_TRAIN_LABELS, CONF_GT, CONF_OUT, CONF_REPORT)


def _choice(enum_type: type) -> vol.All:
    """Accept an enum value, allowing dashes for underscores."""
    return vol.All(
        str,
        lambda value: value.strip().lower().replace("-", "_"),
        vol.In([member.value for member in enum_type]),
    )


def _positive(minimum: int = 1, maximum: int | None = None) -> vol.All:
    return vol.All(vol.Coerce(int), vol.Range(min=minimum, max=maximum))


_OPTIONAL_PATH = vol.Any(None, vol.All(vol.Coerce(str), vol.Length(min=1)))

PIPELINE_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_MODELS): vol.All(
            vol.Any(str, [vol.Coerce(str)]),
            lambda value: [value] if isinstance(value, str) else value,
            vol.Length(min=1, msg="at least one model directory is required"),
        ),
        vol.Optional(CONF_TRAIN_LABELS, default=None): _OPTIONAL_PATH,
        vol.Optional(CONF_GT, default=None): _OPTIONAL_PATH,
        vol.Optional(CONF_OUT, default=None): _OPTIONAL_PATH,
        vol.Optional(CONF_REPORT, default=None): _OPTIONAL_PATH,
        vol.Optional(CONF_K_NEIGHBORS, default=DEFAULT_K_NEIGHBORS): _positive(),
        vol.Optional(
            CONF_K_TRAIN_PENALTY, default=DEFAULT_K_TRAIN_PENALTY
        ): _positive(),
        vol.Optional(CONF_K_TEST_PENALTY, default=DEFAULT_K_TEST_PENALTY): _positive(),
        vol.Optional(CONF_APPLY_B, default=True): vol.Boolean(),
        vol.Optional(CONF_APPLY_C, default=True): vol.Boolean(),
        vol.Optional(CONF_N_QUANTILES, default=DEFAULT_N_QUANTILES): _positive(2),
        vol.Optional(CONF_TRANSFORM_MODE, default=DEFAULT_TRANSFORM_MODE): _choice(
            TransformMode
        ),
        vol.Optional(CONF_ENSEMBLE_MODE, default=DEFAULT_ENSEMBLE_MODE): _choice(
            EnsembleMode
        ),
        vol.Optional(CONF_POOLED_C, default=DEFAULT_POOLED_C): _choice(PooledC),
        vol.Optional(CONF_FILTER_TRAIN_CLASSES, default=False): vol.Boolean(),
        vol.Optional(CONF_THREADS, default=DEFAULT_THREADS): _positive(1, MAX_THREADS),
        vol.Optional(CONF_BLOCK_SIZE, default=DEFAULT_BLOCK_SIZE): _positive(),
    }
)


@dataclass(frozen=True)
class PipelineConfig:
    """Validated settings for one pipeline run."""

    models: tuple[Path, ...]
    train_labels: Path
    gt: Path | None = None
    out: Path | None = None
    report: Path | None = None
    params: RerankParams = RerankParams()
    n_quantiles: int = DEFAULT_N_QUANTILES
    transform_mode: TransformMode = TransformMode.ALL_ROLES
    ensemble_mode: EnsembleMode = EnsembleMode.CONCAT
    pooled_c: PooledC = PooledC.MEAN
    filter_train_classes: bool = False
    threads: int = DEFAULT_THREADS
    block_size: int = DEFAULT_BLOCK_SIZE

    def to_dict(self) -> dict[str, Any]:
        """Convert to a plain dictionary, the inverse of ``build_config``."""
        return {
            CONF_MODELS: [str(m) for m in self.models],
            CONF_TRAIN_LABELS: str(self.train_labels),
            CONF_GT: str(self.gt) if self.gt else None,
            CONF_OUT: str(self.out) if self.out else None,
            CONF_REPORT: str(self.report) if self.report else None,
            CONF_K_NEIGHBORS: self.params.k_neighbors,
            CONF_K_TRAIN_PENALTY: self.params.k_train_penalty,
            CONF_K_TEST_PENALTY: self.params.k_test_penalty,
            CONF_APPLY_B: self.params.apply_b,
            CONF_APPLY_C: self.params.apply_c,
            CONF_N_QUANTILES: self.n_quantiles,
            CONF_TRANSFORM_MODE: self.transform_mode.value,
            CONF_ENSEMBLE_MODE: self.ensemble_mode.value,
            CONF_POOLED_C: self.pooled_c.value,
            CONF_FILTER_TRAIN_CLASSES: self.filter_train_classes,
            CONF_THREADS: self.threads,
            CONF_BLOCK_SIZE: self.block_size,
        }


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a YAML config file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        data = yaml.safe_load(read_text(path))
    except yaml.YAMLError as err:
        raise RerankFormatError(f"Invalid YAML: {err}", path=str(path)) from err
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise RerankFormatError("Config file must hold a mapping", path=str(path))

    base = path.parent
    if CONF_MODELS in data:
        models = data[CONF_MODELS]
        models = [models] if isinstance(models, str) else models
        if isinstance(models, list):
            data[CONF_MODELS] = [str(base / str(m)) for m in models]
    for key in PATH_KEYS:
        if isinstance(data.get(key), str):
            data[key] = str(base / data[key])
    LOG.debug(f"Loaded config file {path}: {sorted(data)}")
    return data


def build_config(
    data: Mapping[str, Any], overrides: Mapping[str, Any] | None = None
) -> PipelineConfig:
    """Validate settings and build a PipelineConfig.

    ``overrides`` (typically command-line flags) win over ``data``; keys whose
    value is None are ignored.
    """
    merged = dict(data)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})

    try:
        valid = PIPELINE_SCHEMA(merged)
    except vol.Invalid as err:
        raise RerankValidationError(f"Invalid configuration: {err}") from err

    if valid[CONF_FILTER_TRAIN_CLASSES] and not valid[CONF_GT]:
        raise RerankValidationError(
            "filter_train_classes needs ground truth (gt) to know the test classes"
        )

    models = tuple(Path(m) for m in valid[CONF_MODELS])
    train_labels = valid[CONF_TRAIN_LABELS] or models[0] / TRAIN_LABELS_FILE

    def _path(key: str) -> Path | None:
        return Path(valid[key]) if valid[key] else None

    return PipelineConfig(
        models=models,
        train_labels=Path(train_labels),
        gt=_path(CONF_GT),
        out=_path(CONF_OUT),
        report=_path(CONF_REPORT),
        params=RerankParams(
            k_neighbors=valid[CONF_K_NEIGHBORS],
            k_train_penalty=valid[CONF_K_TRAIN_PENALTY],
            k_test_penalty=valid[CONF_K_TEST_PENALTY],
            apply_b=valid[CONF_APPLY_B],
            apply_c=valid[CONF_APPLY_C],
        ),
        n_quantiles=valid[CONF_N_QUANTILES],
        transform_mode=TransformMode(valid[CONF_TRANSFORM_MODE]),
        ensemble_mode=EnsembleMode(valid[CONF_ENSEMBLE_MODE]),
        pooled_c=PooledC(valid[CONF_POOLED_C]),
        filter_train_classes=valid[CONF_FILTER_TRAIN_CLASSES],
        threads=valid[CONF_THREADS],
        block_size=valid[CONF_BLOCK_SIZE],
    )
