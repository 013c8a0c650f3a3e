"""Command-line front end: ``landmark-rerank <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import fields
from pathlib import Path
from typing import Any

import voluptuous as vol

from .config import PipelineConfig, build_config, load_config_file
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
    DOMAIN,
    EXIT_INTERNAL,
    EXIT_IO,
    EXIT_OK,
    EXIT_VALIDATION,
    NONLANDMARK_FILE,
    TEST_FILE,
    TEST_GT_FILE,
    TRAIN_FILE,
    TRAIN_LABELS_FILE,
    VERSION,
)
from .diagnostics import build_eval_report, format_report, write_report
from .pipeline import PipelineResult, PipelineStageError, run_pipeline
from .pyrerank import (
    EmbeddingFormat,
    EnsembleMode,
    PooledC,
    SynthConfig,
    TransformMode,
    gap,
    generate,
    load_embeddings,
    load_labels,
    load_predictions,
    save_embeddings,
    write_instance,
)
from .pyrerank.exceptions import RerankIOError, RerankValidationError
from .pyrerank.rerank import format_predictions

LOG = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# synth flags, named after SynthConfig fields
SYNTH_OPTIONS = {f.name: f.type for f in fields(SynthConfig) if f.name != "seed"}


def exit_code(err: BaseException) -> int:
    """Map an error to the process exit code."""
    if isinstance(err, PipelineStageError) and err.__cause__ is not None:
        err = err.__cause__
    if isinstance(err, RerankValidationError | vol.Invalid):
        return EXIT_VALIDATION
    if isinstance(err, RerankIOError | OSError):
        return EXIT_IO
    return EXIT_INTERNAL


def _choices(enum_type: type) -> list[str]:
    return [member.value.replace("_", "-") for member in enum_type]


def _pipeline_options() -> argparse.ArgumentParser:
    """Options shared by rank, rerank and pipeline."""
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("pipeline")
    group.add_argument(
        "--model",
        dest="models",
        action="append",
        metavar="DIR",
        help="model directory with test/train/nonlandmark embeddings (repeatable)",
    )
    group.add_argument("--train-labels", metavar="FILE", help="train labels CSV")
    group.add_argument("--gt", metavar="FILE", help="test ground truth CSV")
    group.add_argument(
        "--out", metavar="FILE", help="predictions CSV (default: stdout)"
    )
    group.add_argument("--k-neighbors", type=int, metavar="K")
    group.add_argument("--k-train-penalty", type=int, metavar="K")
    group.add_argument("--k-test-penalty", type=int, metavar="K")
    group.add_argument(
        "--no-b-penalty", action="store_true", help="skip the train penalty"
    )
    group.add_argument(
        "--no-c-penalty", action="store_true", help="skip the confidence penalty"
    )
    group.add_argument("--n-quantiles", type=int, metavar="Q")
    group.add_argument("--transform-mode", choices=_choices(TransformMode))
    group.add_argument("--ensemble", choices=_choices(EnsembleMode))
    group.add_argument("--pooled-c", choices=_choices(PooledC))
    group.add_argument(
        "--filter-train-classes",
        action="store_true",
        help="drop train classes absent from the ground truth",
    )
    group.add_argument("--threads", type=int)
    group.add_argument("--block-size", type=int)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Collect command-line values; None means not given."""
    return {
        CONF_MODELS: args.models,
        CONF_TRAIN_LABELS: args.train_labels,
        CONF_GT: args.gt,
        CONF_OUT: args.out,
        CONF_REPORT: getattr(args, "report", None),
        CONF_K_NEIGHBORS: args.k_neighbors,
        CONF_K_TRAIN_PENALTY: args.k_train_penalty,
        CONF_K_TEST_PENALTY: args.k_test_penalty,
        CONF_APPLY_B: False if args.no_b_penalty else None,
        CONF_APPLY_C: False if args.no_c_penalty else None,
        CONF_N_QUANTILES: args.n_quantiles,
        CONF_TRANSFORM_MODE: args.transform_mode,
        CONF_ENSEMBLE_MODE: args.ensemble,
        CONF_POOLED_C: args.pooled_c,
        CONF_FILTER_TRAIN_CLASSES: True if args.filter_train_classes else None,
        CONF_THREADS: args.threads,
        CONF_BLOCK_SIZE: args.block_size,
    }


def _config(args: argparse.Namespace) -> PipelineConfig:
    data = load_config_file(args.config) if getattr(args, "config", None) else {}
    return build_config(data, _overrides(args))


def _emit_predictions(config: PipelineConfig, result: PipelineResult) -> None:
    if config.out is None:
        sys.stdout.write(format_predictions(result.predictions))


def cmd_ingest(args: argparse.Namespace) -> int:
    """Convert a CSV embedding file to the binary format."""
    embeddings = load_embeddings(args.input, format=EmbeddingFormat.CSV)
    save_embeddings(embeddings, args.output)
    LOG.info(f"Wrote {len(embeddings)} x {embeddings.dim} embeddings to {args.output}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """Write a synthetic benchmark laid out as a model directory."""
    options = {
        name: getattr(args, name)
        for name in SYNTH_OPTIONS
        if getattr(args, name) is not None
    }
    config = SynthConfig(seed=args.seed, **options)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = write_instance(
        generate(config),
        out_dir,
        test_file=f"{TEST_FILE}.emb",
        train_file=f"{TRAIN_FILE}.emb",
        nonlandmark_file=f"{NONLANDMARK_FILE}.emb",
        train_labels_file=TRAIN_LABELS_FILE,
        test_gt_file=TEST_GT_FILE,
    )
    LOG.info(f"Wrote synthetic benchmark (seed {config.seed}) to {out_dir}")
    for path in paths:
        LOG.debug(f"  {path}")
    return EXIT_OK


def cmd_rank(args: argparse.Namespace) -> int:
    """Rank with plain kNN aggregation, no penalties."""
    config = _config(args)
    result = run_pipeline(config, baseline=True)
    _emit_predictions(config, result)
    return EXIT_OK


def cmd_rerank(args: argparse.Namespace) -> int:
    """Rank with non-landmark penalties."""
    config = _config(args)
    result = run_pipeline(config)
    _emit_predictions(config, result)
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    """Run the full pipeline, optionally comparing and ablating penalties."""
    config = _config(args)
    result = run_pipeline(config, compare=args.compare, ablation=args.ablation)
    _emit_predictions(config, result)
    if result.comparison is not None:
        comparison = result.comparison
        LOG.info(
            f"GAP baseline {comparison.baseline.gap:.4f} -> reranked "
            f"{comparison.reranked.gap:.4f} (delta {comparison.delta:+.4f})"
        )
    if result.ablation is not None:
        for name, report in result.ablation.items():
            LOG.info(f"GAP {name}: {report.gap:.4f}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Score a predictions file against ground truth."""
    report = gap(load_predictions(args.predictions), load_labels(args.gt))
    data = build_eval_report(report, args.predictions, args.gt)
    if args.report:
        write_report(data, args.report)
    sys.stdout.write(format_report(data))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(
        prog="landmark-rerank",
        description="Landmark recognition ranking and non-landmark re-ranking "
        "from precomputed embeddings",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logs")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _pipeline_options()

    ingest = sub.add_parser("ingest", help="convert CSV embeddings to binary")
    ingest.add_argument("input", help="CSV embedding file")
    ingest.add_argument("output", help="binary embedding file to write")
    ingest.set_defaults(handler=cmd_ingest)

    synth = sub.add_parser("synth", help="write a synthetic benchmark")
    synth.add_argument("out_dir", help="directory to write the benchmark into")
    synth.add_argument("--seed", type=int, default=SynthConfig.seed)
    for name, kind in SYNTH_OPTIONS.items():
        synth.add_argument(
            f"--{name.replace('_', '-')}",
            dest=name,
            type=float if kind in (float, "float") else int,
        )
    synth.set_defaults(handler=cmd_synth)

    rank = sub.add_parser("rank", parents=[common], help="plain kNN baseline")
    rank.add_argument("--config", metavar="FILE", help="YAML pipeline config")
    rank.set_defaults(handler=cmd_rank)

    rerank_cmd = sub.add_parser(
        "rerank", parents=[common], help="rank with non-landmark penalties"
    )
    rerank_cmd.add_argument("--config", metavar="FILE", help="YAML pipeline config")
    rerank_cmd.set_defaults(handler=cmd_rerank)

    evaluate = sub.add_parser("eval", help="score predictions with GAP")
    evaluate.add_argument("--predictions", required=True, metavar="FILE")
    evaluate.add_argument("--gt", required=True, metavar="FILE")
    evaluate.add_argument("--report", metavar="FILE", help="also write JSON here")
    evaluate.set_defaults(handler=cmd_eval)

    pipeline = sub.add_parser("pipeline", parents=[common], help="all-in-one run")
    pipeline.add_argument("--config", metavar="FILE", help="YAML pipeline config")
    pipeline.add_argument("--report", metavar="FILE", help="JSON run report")
    pipeline.add_argument(
        "--compare", action="store_true", help="also score the unpenalized baseline"
    )
    pipeline.add_argument(
        "--ablation", action="store_true", help="score all penalty combinations"
    )
    pipeline.set_defaults(handler=cmd_pipeline)

    return parser


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Send logs to stderr at the requested level."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger(DOMAIN).setLevel(level)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code in (0, None) else EXIT_VALIDATION

    setup_logging(args.verbose, args.quiet)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except Exception as err:
        code = exit_code(err)
        if code == EXIT_INTERNAL:
            LOG.exception(f"Unexpected error in {args.command}")
        else:
            LOG.error(f"{args.command} failed: {err}")
        return code
