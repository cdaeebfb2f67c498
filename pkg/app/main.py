"""
binaq - command-line interface.

Subcommands:
    binarize   Run a builtin binarizer over a directory of images
    evaluate   Score a prediction directory or a builtin method against ground truth
    rank       Average metrics and average ranks from means tables or run reports
    report     Re-render a JSON run report as JSON, CSV or Markdown
    patch      Split images into patches or stitch patch predictions back
    overlay    Color-coded error map of one prediction
    hinge      Mean hinge loss of a builtin method's threshold maps

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 no metric defined.
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

# Add project root to path for imports
sys.path.append(str(Path(__file__).parent.parent))

import pandas as pd
from pydantic import ValidationError

from config.settings import RunConfig, load_run_config, settings
from core.binarize import Binarizer, BinarizerConfig
from core.errors import BinaqError, ConfigError, UndefinedMetricError
from core.harness import EvaluationHarness, MethodSource, discover_dataset, load_means_table, means_to_results
from core.imagecore import decode_binary, image_files, load_image, save_binary, save_rgb
from core.patchwork import split_directory, stitch_directory
from core.report import REPORT_FORMATS, emit_report, overlay_errors, parse_report, write_report
from core.utils import canonical_json
from monitor.logger import configure_logging, get_logger

logger = get_logger(__name__)


class CliParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as ConfigError (exit 1)."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_binarizer_flags(parser: argparse.ArgumentParser, method_required: bool) -> None:
    parser.add_argument("--method", choices=["otsu", "sauvola", "mws"], required=False,
                        help="Builtin binarizer" + (" (required)" if method_required else ""))
    parser.add_argument("--window", type=int, help="Sauvola window (odd, >= 3)")
    parser.add_argument("--k", type=float, help="Sauvola sensitivity")
    parser.add_argument("--r", type=float, help="Sauvola dynamic range")
    parser.add_argument("--windows", help="Comma-separated multi-window bank, e.g. 7,15,31,63")
    parser.add_argument("--weights", help="Comma-separated window weights summing to 1")
    parser.add_argument("--patch-size", type=int, dest="patch_size", help="Binarize patch by patch")
    parser.add_argument("--stride", type=int, help="Patch stride (required with --patch-size)")


def build_parser() -> CliParser:
    parser = CliParser(prog="binaq", description="Document binarization evaluation toolkit")
    parser.add_argument("--config", help="Key-value file with defaults for any flag")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-json", dest="log_json", action="store_true", default=None,
                        help="JSON log lines on stderr")
    commands = parser.add_subparsers(dest="command", parser_class=CliParser)
    commands.required = True

    binarize = commands.add_parser("binarize", help="Binarize a directory of images")
    _add_binarizer_flags(binarize, method_required=True)
    binarize.add_argument("--input", help="Directory of source images")
    binarize.add_argument("--output", help="Directory for binary PNGs")

    evaluate = commands.add_parser("evaluate", help="Score predictions against ground truth")
    _add_binarizer_flags(evaluate, method_required=False)
    evaluate.add_argument("--pred", help="Directory of prediction images")
    evaluate.add_argument("--gt", help="Directory of ground-truth images")
    evaluate.add_argument("--images", help="Directory of source images (needed for builtin methods)")
    evaluate.add_argument("--out", help="Report path (.json, .csv or .md)")
    evaluate.add_argument("--name", help="Method name in the report")
    evaluate.add_argument("--dataset", help="Dataset name in the report (default: ground-truth directory name)")
    evaluate.add_argument("--gt-polarity", dest="gt_polarity", choices=["dark", "light"])
    evaluate.add_argument("--pred-polarity", dest="pred_polarity", choices=["dark", "light"])
    evaluate.add_argument("--pred-threshold", dest="pred_threshold", choices=["fixed", "otsu"],
                          help="How non-bilevel predictions are cut")
    evaluate.add_argument("--threads", type=int, help="Worker pool size for scoring")
    evaluate.add_argument("--throughput", action="store_true", default=None,
                          help="Also time builtin methods")

    rank = commands.add_parser("rank", help="Average metrics and ranks across datasets")
    rank.add_argument("--reports", nargs="+", help="Means CSV tables or JSON run reports")
    rank.add_argument("--out", help="Output table (.md, .csv or .json)")

    report = commands.add_parser("report", help="Render a JSON run report")
    report.add_argument("--in", dest="input", help="JSON run report")
    report.add_argument("--format", choices=REPORT_FORMATS, help="Output format (default: from --out suffix, else markdown)")
    report.add_argument("--out", help="Output file (default: stdout)")

    patch = commands.add_parser("patch", help="Patch protocol")
    patch_commands = patch.add_subparsers(dest="patch_command", parser_class=CliParser)
    patch_commands.required = True
    split = patch_commands.add_parser("split", help="Split images into overlapping patches")
    split.add_argument("--input")
    split.add_argument("--output")
    split.add_argument("--patch-size", type=int, dest="patch_size")
    split.add_argument("--stride", type=int)
    split.add_argument("--augment", action="store_true", default=None,
                       help="Also write flipped, rotated and diagonally mirrored patches")
    stitch = patch_commands.add_parser("stitch", help="Stitch patch predictions into full images")
    stitch.add_argument("--input", help="Directory with patches and grid sidecars")
    stitch.add_argument("--output")

    overlay = commands.add_parser("overlay", help="Color-coded error overlay")
    overlay.add_argument("--pred")
    overlay.add_argument("--gt")
    overlay.add_argument("--out")
    overlay.add_argument("--gt-polarity", dest="gt_polarity", choices=["dark", "light"])
    overlay.add_argument("--pred-polarity", dest="pred_polarity", choices=["dark", "light"])

    hinge = commands.add_parser("hinge", help="Hinge loss of threshold maps against ground truth")
    _add_binarizer_flags(hinge, method_required=True)
    hinge.add_argument("--images")
    hinge.add_argument("--gt")
    hinge.add_argument("--alpha", type=float, help="Decision margin (default 16)")
    hinge.add_argument("--gt-polarity", dest="gt_polarity", choices=["dark", "light"])

    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file values overridden by any flag given on the command line."""
    flags = {key: value for key, value in vars(args).items() if key in RunConfig.model_fields}
    try:
        return load_run_config(args.config).merged_with(flags)
    except ValidationError as e:
        raise ConfigError(f"Invalid flag values: {e}")


def require(value, flag: str):
    """A value that must come from the command line or the config file."""
    if value is None:
        raise ConfigError(f"{flag} is required (on the command line or in --config)")
    return value


def binarizer_config(config: RunConfig) -> BinarizerConfig:
    if config.method is None:
        raise ConfigError("A builtin method is required: --method otsu|sauvola|mws")
    return BinarizerConfig.build(config.method, config.window, config.k, config.r, config.windows, config.weights)


def _patch_args(config: RunConfig):
    if config.patch_size is not None and config.stride is None:
        raise ConfigError("--patch-size needs an explicit --stride")
    return config.patch_size, config.stride


def cmd_binarize(args: argparse.Namespace, config: RunConfig) -> int:
    binarizer = Binarizer(binarizer_config(config))
    patch_size, stride = _patch_args(config)
    input_dir = Path(require(config.input, "--input"))
    if not input_dir.is_dir():
        raise ConfigError(f"Input directory not found: {input_dir}")
    output_dir = Path(require(config.output, "--output"))
    output_dir.mkdir(parents=True, exist_ok=True)

    for path in image_files(input_dir):
        result = binarizer.binarize(load_image(path), patch_size, stride)
        save_binary(result, output_dir / f"{path.stem}.png")
        logger.info("image_binarized", image=path.name, method=binarizer.name)
    return 0


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    if (config.pred is None) == (config.method is None):
        raise ConfigError("evaluate needs exactly one of --pred or --method")
    gt_dir = Path(require(config.gt, "--gt"))
    out = require(config.out, "--out")

    if config.pred is not None:
        method = MethodSource.predictions(Path(config.pred), config.name, config.pred_polarity or "dark",
                                          config.pred_threshold or "fixed")
    else:
        patch_size, stride = _patch_args(config)
        method = MethodSource.builtin(binarizer_config(config), patch_size, stride, config.name)

    dataset = config.dataset or gt_dir.name
    images_dir = Path(config.images) if config.images else None
    harness = EvaluationHarness(gt_polarity=config.gt_polarity or "dark", threads=config.threads)
    report = harness.run([method], {dataset: (images_dir, gt_dir)}, throughput=bool(config.throughput))
    write_report(report, out)

    if not report.has_defined_values():
        raise UndefinedMetricError("No metric could be computed for any image of this run")
    return 0


def cmd_rank(args: argparse.Namespace, config: RunConfig) -> int:
    paths = require(config.reports, "--reports")
    if not paths:
        raise ConfigError("--reports needs at least one means table or run report")
    out = require(config.out, "--out")
    tables = [load_means_table(Path(path)) for path in paths]
    table = pd.concat(tables, ignore_index=True)
    results = means_to_results(table)
    report = EvaluationHarness.assemble(results, {"reports": [Path(p).name for p in paths]}, strict=True)
    write_report(report, out)
    return 0


def cmd_report(args: argparse.Namespace, config: RunConfig) -> int:
    path = Path(require(config.input, "--in"))
    if not path.is_file():
        raise ConfigError(f"Report not found: {path}")
    report = parse_report(path.read_bytes(), str(path))
    if config.out:
        write_report(report, config.out, config.format)
    else:
        sys.stdout.buffer.write(emit_report(report, config.format or "markdown"))
        sys.stdout.flush()
    return 0


def cmd_patch(args: argparse.Namespace, config: RunConfig) -> int:
    input_dir = Path(require(config.input, "--input"))
    output_dir = Path(require(config.output, "--output"))
    if args.patch_command == "split":
        patch_size = config.patch_size or settings.patch_size
        if config.stride is None:
            raise ConfigError("patch split needs an explicit --stride")
        count = split_directory(input_dir, output_dir, patch_size, config.stride, bool(config.augment))
    else:
        count = stitch_directory(input_dir, output_dir)
    logger.info("patch_command_finished", command=args.patch_command, images=count)
    return 0


def cmd_overlay(args: argparse.Namespace, config: RunConfig) -> int:
    pred = decode_binary(load_image(require(config.pred, "--pred")), config.pred_polarity or "dark")
    gt = decode_binary(load_image(require(config.gt, "--gt")), config.gt_polarity or "dark")
    out = require(config.out, "--out")
    save_rgb(overlay_errors(pred, gt), out)
    logger.info("overlay_written", path=str(out))
    return 0


def cmd_hinge(args: argparse.Namespace, config: RunConfig) -> int:
    binarizer = Binarizer(binarizer_config(config))
    alpha = settings.hinge_alpha if config.alpha is None else config.alpha
    images_dir = Path(require(config.images, "--images"))
    gt_dir = Path(require(config.gt, "--gt"))
    losses: Dict[str, float] = {}
    for entry in discover_dataset(images_dir, gt_dir):
        gt = decode_binary(load_image(entry.gt_path), config.gt_polarity or "dark")
        losses[entry.id] = binarizer.hinge(load_image(entry.image_path), gt, alpha)

    summary = {
        "method": binarizer.name,
        "alpha": alpha,
        "mean": sum(losses.values()) / len(losses) if losses else None,
        "images": losses,
    }
    sys.stdout.write(canonical_json(summary) + "\n")
    return 0


COMMANDS = {
    "binarize": cmd_binarize,
    "evaluate": cmd_evaluate,
    "rank": cmd_rank,
    "report": cmd_report,
    "patch": cmd_patch,
    "overlay": cmd_overlay,
    "hinge": cmd_hinge,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    configure_logging(settings.log_level, settings.log_json)
    try:
        args = build_parser().parse_args(argv)
        config = resolve_config(args)
        if config.log_level or config.log_json:
            configure_logging(config.log_level or settings.log_level, bool(config.log_json) or settings.log_json)
        return COMMANDS[args.command](args, config)
    except BinaqError as e:
        logger.error("command_failed", error=str(e), exit_code=e.exit_code)
        sys.stderr.write(f"binaq: {e}\n")
        return e.exit_code
    except OSError as e:
        logger.error("command_failed", error=str(e), exit_code=2)
        sys.stderr.write(f"binaq: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
