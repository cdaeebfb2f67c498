"""
Run report model and its renderers.

A ``RunReport`` holds per-image scores and per-dataset means for every
(method, dataset) pair, cross-dataset averages, average ranks, throughput
and provenance. It renders to JSON (full precision, round-trippable),
CSV (one row per image plus summary rows) and Markdown (per-dataset
tables with the best value of each column in bold).
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core.errors import ConfigError, FormatError
from core.imagecore import BinaryImage, RgbImage, ensure_same_shape
from core.metrics import HIGHER_IS_BETTER, METRIC_NAMES, ConfusionCounts, MetricScores, MetricValue, \
    Undefined, is_defined
from core.utils import canonical_json, format_fixed, save_text
from monitor.logger import get_logger

logger = get_logger(__name__)

REPORT_FORMATS = ("json", "csv", "markdown")
SCORE_FIELDS = ("psnr", "fm", "pfm", "drd", "recall", "precision", "p_recall", "p_precision")
METRIC_LABELS = {"psnr": "PSNR", "fm": "FM", "pfm": "p-FM", "drd": "DRD"}
# FM and pFM are stored as ratios and shown as percentages
PERCENT_METRICS = ("fm", "pfm")

TP_COLOR = (0, 0, 0)
TN_COLOR = (255, 255, 255)
FP_COLOR = (0, 255, 255)
FN_COLOR = (255, 165, 0)


@dataclass(frozen=True)
class ImageResult:
    id: str
    scores: MetricScores


@dataclass(frozen=True)
class DatasetResult:
    """Scores of one method on one dataset; ``images`` is empty for summary-only input."""
    method: str
    dataset: str
    means: Dict[str, MetricValue]
    images: Tuple[ImageResult, ...] = ()


@dataclass(frozen=True)
class ThroughputResult:
    method: str
    dataset: str
    images: int
    seconds: float
    images_per_second: float


@dataclass(frozen=True)
class Provenance:
    tool_version: str
    config_hash: str
    config: Dict = field(default_factory=dict)
    hardware: str = ""


@dataclass(frozen=True)
class Timing:
    """Wall-clock facts of a run; excluded from the deterministic report body."""
    started_at: str = ""
    finished_at: str = ""
    throughput: Tuple[ThroughputResult, ...] = ()


@dataclass(frozen=True)
class RunReport:
    results: Tuple[DatasetResult, ...]
    averages: Dict[str, Dict[str, float]]
    ranks: Dict[str, float]
    provenance: Provenance
    timing: Timing = field(default_factory=Timing)

    def methods(self) -> List[str]:
        return list(dict.fromkeys(result.method for result in self.results))

    def datasets(self) -> List[str]:
        return list(dict.fromkeys(result.dataset for result in self.results))

    def result(self, method: str, dataset: str) -> Optional[DatasetResult]:
        for result in self.results:
            if result.method == method and result.dataset == dataset:
                return result
        return None

    def means_frame(self) -> pd.DataFrame:
        """Long-form means table (method, dataset, psnr, fm, pfm, drd); undefined -> NaN."""
        rows = []
        for result in self.results:
            row = {"method": result.method, "dataset": result.dataset}
            for metric in METRIC_NAMES:
                value = result.means.get(metric, Undefined("missing"))
                row[metric] = value if is_defined(value) else np.nan
            rows.append(row)
        return pd.DataFrame(rows, columns=["method", "dataset", *METRIC_NAMES])

    def has_defined_values(self) -> bool:
        """True when at least one per-image (or summary) metric is defined."""
        for result in self.results:
            if any(is_defined(value) for value in result.means.values()):
                return True
            for image in result.images:
                if any(is_defined(image.scores.value(name)) for name in SCORE_FIELDS):
                    return True
        return False

    def throughput_by_method(self) -> Dict[str, float]:
        totals: Dict[str, List[float]] = {}
        for item in self.timing.throughput:
            images, seconds = totals.setdefault(item.method, [0, 0.0])
            totals[item.method] = [images + item.images, seconds + item.seconds]
        return {method: images / max(seconds, 1e-9) for method, (images, seconds) in totals.items()}


# ---------------------------------------------------------------------------
# JSON encoding
# ---------------------------------------------------------------------------

def _encode_value(value: MetricValue):
    if isinstance(value, Undefined):
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


def _decode_value(raw, reason: Optional[str]) -> MetricValue:
    if raw is None:
        return Undefined(reason or "undefined")
    if raw in ("inf", "-inf"):
        return math.inf if raw == "inf" else -math.inf
    return float(raw)


def _encode_values(values: Dict[str, MetricValue]) -> Dict:
    return {
        "values": {name: _encode_value(value) for name, value in values.items()},
        "undefined": {name: value.reason for name, value in values.items() if isinstance(value, Undefined)},
    }


def _decode_values(data: Dict) -> Dict[str, MetricValue]:
    reasons = data.get("undefined", {})
    return {name: _decode_value(raw, reasons.get(name)) for name, raw in data["values"].items()}


def _scores_to_dict(scores: MetricScores) -> Dict:
    encoded = _encode_values({name: scores.value(name) for name in SCORE_FIELDS})
    encoded["counts"] = {"tp": scores.counts.tp, "fp": scores.counts.fp,
                         "fn": scores.counts.fn, "tn": scores.counts.tn}
    return encoded


def _scores_from_dict(data: Dict) -> MetricScores:
    values = _decode_values(data)
    return MetricScores(counts=ConfusionCounts(**{key: int(v) for key, v in data["counts"].items()}), **values)


def report_to_dict(report: RunReport) -> Dict:
    return dict(report_body(report), timing={
        "started_at": report.timing.started_at,
        "finished_at": report.timing.finished_at,
        "throughput": [vars(item) for item in report.timing.throughput],
    })


def report_body(report: RunReport) -> Dict:
    """Deterministic part of the report: everything except timing."""
    return {
        "provenance": {
            "tool_version": report.provenance.tool_version,
            "config_hash": report.provenance.config_hash,
            "config": report.provenance.config,
            "hardware": report.provenance.hardware,
        },
        "results": [
            {
                "method": result.method,
                "dataset": result.dataset,
                "means": _encode_values(result.means),
                "images": [{"id": image.id, "scores": _scores_to_dict(image.scores)} for image in result.images],
            }
            for result in report.results
        ],
        "averages": report.averages,
        "ranks": report.ranks,
    }


def report_from_dict(data: Dict) -> RunReport:
    timing = data.get("timing", {})
    return RunReport(
        results=tuple(
            DatasetResult(
                method=item["method"],
                dataset=item["dataset"],
                means=_decode_values(item["means"]),
                images=tuple(ImageResult(image["id"], _scores_from_dict(image["scores"]))
                             for image in item.get("images", [])),
            )
            for item in data["results"]
        ),
        averages={method: {metric: float(v) for metric, v in values.items()}
                  for method, values in data.get("averages", {}).items()},
        ranks={method: float(rank) for method, rank in data.get("ranks", {}).items()},
        provenance=Provenance(**data["provenance"]),
        timing=Timing(
            started_at=timing.get("started_at", ""),
            finished_at=timing.get("finished_at", ""),
            throughput=tuple(ThroughputResult(**item) for item in timing.get("throughput", [])),
        ),
    )


def parse_report(content: Union[str, bytes], source: str = "<report>") -> RunReport:
    """Parse JSON produced by ``emit_report``.

    Raises:
        FormatError: If the content is not a valid report
    """
    try:
        return report_from_dict(json.loads(content))
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(source, f"not a valid run report: {e}")


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

def best_per_dataset(report: RunReport) -> Dict[Tuple[str, str], List[str]]:
    """Winning method(s) for every (dataset, metric); ties list every winner."""
    winners = {}
    frame = report.means_frame()
    for dataset, rows in frame.groupby("dataset", sort=False):
        for metric in METRIC_NAMES:
            defined = rows.dropna(subset=[metric])
            if defined.empty:
                continue
            target = defined[metric].max() if HIGHER_IS_BETTER[metric] else defined[metric].min()
            winners[(dataset, metric)] = defined.loc[defined[metric] == target, "method"].tolist()
    return winners


def _display(metric: str, value) -> str:
    if value is None or isinstance(value, Undefined) or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    if metric in PERCENT_METRICS:
        value = value * 100.0
    return format_fixed(value, 2)


def _header(metric: str) -> str:
    return f"{METRIC_LABELS[metric]} {'↑' if HIGHER_IS_BETTER[metric] else '↓'}"


def _markdown_table(header: List[str], rows: List[List[str]]) -> List[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return lines


def _bold_if(text: str, condition: bool) -> str:
    return f"**{text}**" if condition and text != "n/a" else text


def render_markdown(report: RunReport) -> str:
    winners = best_per_dataset(report)
    lines = ["# Binarization evaluation report", ""]

    for dataset in report.datasets():
        lines += [f"## {dataset}", ""]
        rows = []
        for method in report.methods():
            result = report.result(method, dataset)
            if result is None:
                continue
            row = [method]
            for metric in METRIC_NAMES:
                value = result.means.get(metric)
                row.append(_bold_if(_display(metric, value), method in winners.get((dataset, metric), [])))
            rows.append(row)
        lines += _markdown_table(["Method"] + [_header(metric) for metric in METRIC_NAMES], rows)
        lines.append("")

    if report.averages:
        throughput = report.throughput_by_method()
        best = {}
        for metric in METRIC_NAMES:
            values = [report.averages[m][metric] for m in report.averages]
            best[metric] = max(values) if HIGHER_IS_BETTER[metric] else min(values)
        best_rank = min(report.ranks.values()) if report.ranks else None

        header = ["Method"] + [_header(metric) for metric in METRIC_NAMES] + ["Avg. rank ↓"]
        if throughput:
            header.append("img/sec ↑")
        rows = []
        for method, values in report.averages.items():
            row = [method]
            for metric in METRIC_NAMES:
                row.append(_bold_if(_display(metric, values[metric]), values[metric] == best[metric]))
            rank = report.ranks.get(method)
            row.append(_bold_if(_display("rank", rank), rank is not None and rank == best_rank))
            if throughput:
                row.append(format_fixed(throughput[method], 2) if method in throughput else "n/a")
            rows.append(row)
        lines += ["## Average over all datasets", ""]
        lines += _markdown_table(header, rows)
        lines.append("")

    return "\n".join(lines)


def render_csv(report: RunReport) -> str:
    rows = []
    for result in report.results:
        for image in result.images:
            row = {"row_type": "image", "method": result.method, "dataset": result.dataset, "image": image.id}
            for name in SCORE_FIELDS:
                value = image.scores.value(name)
                row[name] = None if isinstance(value, Undefined) else value
            row.update(tp=image.scores.counts.tp, fp=image.scores.counts.fp,
                       fn=image.scores.counts.fn, tn=image.scores.counts.tn)
            rows.append(row)
        summary = {"row_type": "dataset_mean", "method": result.method, "dataset": result.dataset}
        for metric in METRIC_NAMES:
            value = result.means.get(metric)
            summary[metric] = value if value is not None and is_defined(value) else None
        rows.append(summary)

    for method, values in report.averages.items():
        rows.append(dict(values, row_type="average", method=method, dataset="ALL",
                         avg_rank=report.ranks.get(method)))

    columns = ["row_type", "method", "dataset", "image", *SCORE_FIELDS, "tp", "fp", "fn", "tn", "avg_rank"]
    frame = pd.DataFrame(rows, columns=columns)
    for count in ("tp", "fp", "fn", "tn"):
        frame[count] = frame[count].astype("Int64")
    return frame.to_csv(index=False)


def emit_report(report: RunReport, fmt: str) -> bytes:
    """Render a report as JSON, CSV or Markdown bytes.

    Raises:
        ConfigError: If the format is unknown
    """
    if fmt == "json":
        return (canonical_json(report_to_dict(report)) + "\n").encode("utf-8")
    if fmt == "csv":
        return render_csv(report).encode("utf-8")
    if fmt == "markdown":
        return render_markdown(report).encode("utf-8")
    raise ConfigError(f"Unknown report format '{fmt}'; expected one of {', '.join(REPORT_FORMATS)}")


def format_for_path(path: Union[str, Path]) -> str:
    suffix = Path(path).suffix.lower()
    formats = {".json": "json", ".csv": "csv", ".md": "markdown", ".markdown": "markdown"}
    if suffix not in formats:
        raise ConfigError(f"Cannot infer report format from '{path}'; use .json, .csv or .md")
    return formats[suffix]


def write_report(report: RunReport, path: Union[str, Path], fmt: Optional[str] = None) -> None:
    fmt = fmt or format_for_path(path)
    save_text(emit_report(report, fmt), str(path))
    logger.info("report_written", path=str(path), format=fmt)


# ---------------------------------------------------------------------------
# Error overlay
# ---------------------------------------------------------------------------

def overlay_errors(pred: BinaryImage, gt: BinaryImage) -> RgbImage:
    """Color every pixel by its confusion class: TP black, TN white, FP cyan, FN orange."""
    ensure_same_shape(pred, gt, "prediction and ground truth")
    p = pred.labels
    g = gt.labels
    pixels = np.empty(p.shape + (3,), dtype=np.uint8)
    pixels[...] = TN_COLOR
    pixels[p & g] = TP_COLOR
    pixels[p & ~g] = FP_COLOR
    pixels[~p & g] = FN_COLOR
    return RgbImage(pixels)
