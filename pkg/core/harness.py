"""
Evaluation harness - dataset discovery, scoring, aggregation and ranking.

This module is the main entry point for evaluating binarization methods:
- Pairs images with ground truth following the DIBCO file naming convention
- Runs builtin binarizers or ingests exported prediction directories
- Scores every pair and computes unweighted per-dataset means
- Aggregates means across datasets and computes average ranks
- Measures single-threaded throughput of builtin methods
"""

import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import settings
from core import __version__
from core.binarize import Binarizer, BinarizerConfig, otsu_binarize
from core.errors import AggregationError, ConfigError, DatasetMatchError, EvaluationError, FormatError, \
    ShapeError, UnsupportedOperationError
from core.imagecore import BinaryImage, DatasetEntry, Polarity, RasterImage, decode_binary, image_files, \
    image_size, load_image
from core.metrics import HIGHER_IS_BETTER, METRIC_NAMES, MetricValue, Undefined, is_defined, score_pair
from core.report import DatasetResult, ImageResult, Provenance, RunReport, ThroughputResult, Timing, \
    parse_report
from core.utils import config_hash, normalize_stem
from monitor.logger import get_logger

logger = get_logger(__name__)

MEANS_COLUMNS = ["method", "dataset", *METRIC_NAMES]


class MethodKind(str, Enum):
    BUILTIN = "builtin"
    PREDICTIONS = "predictions"


@dataclass(frozen=True)
class MethodSource:
    """A method to evaluate: a builtin binarizer or a directory of exported predictions."""
    kind: MethodKind
    name: str
    binarizer: Optional[BinarizerConfig] = None
    pred_dir: Optional[Path] = None
    patch_size: Optional[int] = None
    stride: Optional[int] = None
    pred_polarity: Polarity = Polarity.DARK
    pred_threshold: str = "fixed"

    @classmethod
    def builtin(cls, config: BinarizerConfig, patch_size: Optional[int] = None,
                stride: Optional[int] = None, name: Optional[str] = None) -> "MethodSource":
        if patch_size is not None and stride is None:
            raise ConfigError("Patch-wise evaluation needs an explicit stride")
        return cls(MethodKind.BUILTIN, name or config.method.value, binarizer=config,
                   patch_size=patch_size, stride=stride)

    @classmethod
    def predictions(cls, pred_dir: Path, name: Optional[str] = None, polarity: str = "dark",
                    threshold: str = "fixed") -> "MethodSource":
        if threshold not in ("fixed", "otsu"):
            raise ConfigError(f"Unknown prediction threshold '{threshold}'; expected fixed or otsu")
        pred_dir = Path(pred_dir)
        return cls(MethodKind.PREDICTIONS, name or pred_dir.name, pred_dir=pred_dir,
                   pred_polarity=Polarity(polarity), pred_threshold=threshold)

    def describe(self) -> Dict:
        data = {"kind": self.kind.value, "name": self.name}
        if self.kind is MethodKind.BUILTIN:
            data.update(self.binarizer.describe())
            if self.patch_size is not None:
                data.update(patch_size=self.patch_size, stride=self.stride)
        else:
            data.update(pred_polarity=self.pred_polarity.value, pred_threshold=self.pred_threshold)
        return data


def _index_by_id(paths: Iterable[Path], what: str) -> Dict[str, Path]:
    indexed: Dict[str, Path] = {}
    for path in paths:
        key = normalize_stem(path)
        if key in indexed:
            raise EvaluationError(f"Two {what} files share the id '{key}': {indexed[key].name}, {path.name}")
        indexed[key] = path
    return indexed


def discover_dataset(images_dir: Optional[Path], gt_dir: Path) -> List[DatasetEntry]:
    """Pair images with ground truth by file stem.

    A ``_GT``/``_gt`` suffix and differing extensions are tolerated. Without
    ``images_dir`` the entries come from the ground truth alone.

    Raises:
        ConfigError: If a directory does not exist
        DatasetMatchError: If any image or ground truth has no partner
        ShapeError: If a pair disagrees in dimensions
    """
    gt_dir = Path(gt_dir)
    for directory in (images_dir, gt_dir):
        if directory is not None and not Path(directory).is_dir():
            raise ConfigError(f"Directory not found: {directory}")

    gts = _index_by_id(image_files(gt_dir), "ground truth")
    if images_dir is None:
        entries = [DatasetEntry(key, None, gts[key]) for key in sorted(gts)]
    else:
        images = _index_by_id(image_files(images_dir), "image")
        orphan_images = set(images) - set(gts)
        orphan_gts = set(gts) - set(images)
        if orphan_images or orphan_gts:
            raise DatasetMatchError(orphan_images, orphan_gts)

        entries = []
        for key in sorted(gts):
            image_shape = image_size(images[key])
            gt_shape = image_size(gts[key])
            if image_shape != gt_shape:
                raise ShapeError(f"Entry '{key}': image is {image_shape} but ground truth is {gt_shape}")
            entries.append(DatasetEntry(key, images[key], gts[key]))

    logger.info("dataset_discovered", gt_dir=str(gt_dir), entries=len(entries))
    return entries


def _decode_prediction(raster: RasterImage, method: MethodSource) -> BinaryImage:
    # Enhanced grayscale outputs get Otsu instead of the fixed cut when asked
    if method.pred_threshold == "otsu" and np.unique(raster.intensities).size > 2:
        binary = otsu_binarize(raster)
        return binary if method.pred_polarity is Polarity.DARK else binary.inverted()
    return decode_binary(raster, method.pred_polarity)


def _prediction_paths(method: MethodSource, entries: Sequence[DatasetEntry]) -> Dict[str, Path]:
    if not method.pred_dir.is_dir():
        raise ConfigError(f"Prediction directory not found: {method.pred_dir}")
    available = _index_by_id(image_files(method.pred_dir), "prediction")
    missing = [entry.id for entry in entries if entry.id not in available]
    if missing:
        raise EvaluationError(f"Method '{method.name}' has no prediction for: {', '.join(missing)}")
    return {entry.id: available[entry.id] for entry in entries}


def dataset_means(images: Sequence[ImageResult], method: str = "", dataset: str = "") -> Dict[str, MetricValue]:
    """Unweighted means over images, skipping undefined values with a warning.

    An infinite PSNR (prediction identical to ground truth) is skipped the
    same way. A metric with no usable value at all stays Undefined.
    """
    means: Dict[str, MetricValue] = {}
    for metric in METRIC_NAMES:
        values = []
        for image in images:
            value = image.scores.value(metric)
            if is_defined(value):
                values.append(value)
                continue
            reason = value.reason if isinstance(value, Undefined) else "infinite PSNR (identical images)"
            logger.warning("metric_undefined", method=method, dataset=dataset, image_id=image.id,
                           metric=metric, reason=reason)
        means[metric] = float(np.mean(values)) if values else Undefined(f"no image has a defined {metric}")
    return means


def pool_size(threads: Optional[int] = None) -> int:
    """Scoring workers: the requested count capped by BINAQ_THREADS."""
    cap = max(1, settings.threads)
    return max(1, min(threads or cap, cap))


def evaluate(method: MethodSource, entries: Sequence[DatasetEntry], dataset: str = "dataset",
             gt_polarity: str = "dark", threads: Optional[int] = None) -> DatasetResult:
    """Score one method on one dataset.

    Raises:
        EvaluationError: If the dataset is empty or a prediction is missing
        ShapeError: If a prediction disagrees with its ground truth in dimensions
    """
    if not entries:
        raise EvaluationError(f"Dataset '{dataset}' is empty")

    gt_polarity = Polarity(gt_polarity)
    if method.kind is MethodKind.PREDICTIONS:
        predictions = _prediction_paths(method, entries)
    else:
        unpaired = [entry.id for entry in entries if entry.image_path is None]
        if unpaired:
            raise EvaluationError(f"Builtin method '{method.name}' needs source images for: {', '.join(unpaired)}")
        binarizer = Binarizer(method.binarizer)

    def score(entry: DatasetEntry) -> ImageResult:
        gt = decode_binary(load_image(entry.gt_path), gt_polarity)
        if method.kind is MethodKind.PREDICTIONS:
            pred = _decode_prediction(load_image(predictions[entry.id]), method)
        else:
            pred = binarizer.binarize(load_image(entry.image_path), method.patch_size, method.stride)
        try:
            scores = score_pair(pred, gt)
        except ShapeError as e:
            raise ShapeError(f"Entry '{entry.id}': {e}")
        logger.debug("image_scored", method=method.name, dataset=dataset, image_id=entry.id)
        return ImageResult(entry.id, scores)

    workers = pool_size(threads)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map keeps entry order, so results come back sorted by id
        images = tuple(pool.map(score, entries))

    logger.info("dataset_evaluated", method=method.name, dataset=dataset, images=len(images))
    return DatasetResult(method=method.name, dataset=dataset,
                         means=dataset_means(images, method.name, dataset), images=images)


def _complete_means(table: pd.DataFrame) -> pd.DataFrame:
    """Validate that every (method, dataset, metric) cell holds a number."""
    missing_columns = [column for column in MEANS_COLUMNS if column not in table.columns]
    if missing_columns:
        raise AggregationError("*", "*", ",".join(missing_columns), "column missing")

    methods = list(dict.fromkeys(table["method"]))
    datasets = list(dict.fromkeys(table["dataset"]))
    duplicated = table[table.duplicated(["method", "dataset"], keep=False)]
    if not duplicated.empty:
        row = duplicated.iloc[0]
        raise AggregationError(row["method"], row["dataset"], "*", "duplicate row")

    indexed = table.set_index(["method", "dataset"])
    for method in methods:
        for dataset in datasets:
            if (method, dataset) not in indexed.index:
                raise AggregationError(method, dataset, "*", "no row")
            for metric in METRIC_NAMES:
                value = indexed.loc[(method, dataset), metric]
                if pd.isna(value) or not math.isfinite(float(value)):
                    raise AggregationError(method, dataset, metric, "value undefined")
    return table


def aggregate_metrics(table: pd.DataFrame) -> pd.DataFrame:
    """Arithmetic mean over datasets of every metric, one row per method.

    Args:
        table: Long-form means with columns method, dataset, psnr, fm, pfm, drd

    Returns:
        DataFrame indexed by method in input order

    Raises:
        AggregationError: If any (method, dataset, metric) cell is missing
    """
    table = _complete_means(table)
    return table.groupby("method", sort=False)[list(METRIC_NAMES)].mean()


def rank_methods(table: pd.DataFrame) -> pd.Series:
    """Average rank of every method over all (dataset, metric) cells.

    Rank 1 is best; ties share the mean of their positions.

    Raises:
        AggregationError: If any (method, dataset, metric) cell is missing
    """
    table = _complete_means(table)
    methods = list(dict.fromkeys(table["method"]))
    ranks = []
    for metric in METRIC_NAMES:
        grid = table.pivot(index="method", columns="dataset", values=metric)
        ranks.append(grid.rank(axis=0, ascending=not HIGHER_IS_BETTER[metric], method="average"))
    cells = pd.concat(ranks, axis=1)
    return cells.mean(axis=1).reindex(methods).rename("avg_rank")


def hardware_note() -> str:
    return f"{platform.system()} {platform.machine()} python {platform.python_version()}"


def measure_throughput(method: MethodSource, entries: Sequence[DatasetEntry],
                       dataset: str = "dataset") -> ThroughputResult:
    """Images per second of a single-threaded pass; image loading is not timed.

    Raises:
        UnsupportedOperationError: For prediction-directory methods
    """
    if method.kind is not MethodKind.BUILTIN:
        raise UnsupportedOperationError(f"Throughput needs a builtin method; '{method.name}' is a prediction directory")
    if not entries:
        raise EvaluationError(f"Dataset '{dataset}' is empty")

    binarizer = Binarizer(method.binarizer)
    rasters = [load_image(entry.image_path) for entry in entries]

    start = time.perf_counter()
    for raster in rasters:
        binarizer.binarize(raster, method.patch_size, method.stride)
    elapsed = max(time.perf_counter() - start, 1e-9)

    result = ThroughputResult(method=method.name, dataset=dataset, images=len(rasters),
                              seconds=elapsed, images_per_second=len(rasters) / elapsed)
    logger.info("throughput_measured", method=method.name, dataset=dataset,
                images_per_second=round(result.images_per_second, 3))
    return result


def load_means_table(path: Path) -> pd.DataFrame:
    """Read per-dataset means from a CSV table or a RunReport JSON file.

    CSV tables carry FM and pFM in percent, as published; they are converted
    to ratios here.

    Raises:
        FormatError: If the file cannot be parsed or lacks required columns
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Means table not found: {path}")

    if path.suffix.lower() == ".json":
        return parse_report(path.read_bytes(), str(path)).means_frame()

    try:
        table = pd.read_csv(path)
    except (ValueError, pd.errors.ParserError) as e:
        raise FormatError(path, str(e))
    table.columns = [str(column).strip().lower() for column in table.columns]
    missing = [column for column in MEANS_COLUMNS if column not in table.columns]
    if missing:
        raise FormatError(path, f"missing columns: {', '.join(missing)}")

    table = table[MEANS_COLUMNS].copy()
    table["method"] = table["method"].astype(str)
    table["dataset"] = table["dataset"].astype(str)
    for metric in METRIC_NAMES:
        table[metric] = pd.to_numeric(table[metric], errors="coerce")
    table["fm"] = table["fm"] / 100.0
    table["pfm"] = table["pfm"] / 100.0
    return table


def means_to_results(table: pd.DataFrame) -> Tuple[DatasetResult, ...]:
    """Summary-only dataset results from a long-form means table."""
    results = []
    for row in table.itertuples(index=False):
        means = {}
        for metric in METRIC_NAMES:
            value = getattr(row, metric)
            means[metric] = float(value) if not pd.isna(value) else Undefined("missing in means table")
        results.append(DatasetResult(method=row.method, dataset=row.dataset, means=means))
    return tuple(results)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class EvaluationHarness:
    """Evaluate methods over datasets and assemble a RunReport."""

    def __init__(self, gt_polarity: str = "dark", threads: Optional[int] = None):
        self.gt_polarity = gt_polarity
        self.threads = threads

    def run(self, methods: Sequence[MethodSource], datasets: Dict[str, Tuple[Optional[Path], Path]],
            throughput: bool = False) -> RunReport:
        """Evaluate every method on every dataset.

        Args:
            methods: Methods to score
            datasets: Dataset name -> (images directory or None, ground-truth directory)
            throughput: Also time builtin methods

        Returns:
            RunReport with averages and ranks when every cell is defined
        """
        started = _now()
        results = []
        timings = []
        for name, (images_dir, gt_dir) in datasets.items():
            entries = discover_dataset(images_dir, gt_dir)
            for method in methods:
                results.append(evaluate(method, entries, name, self.gt_polarity, self.threads))
                if throughput and method.kind is MethodKind.BUILTIN:
                    timings.append(measure_throughput(method, entries, name))

        config = {
            "methods": [method.describe() for method in methods],
            "datasets": list(datasets),
            "gt_polarity": self.gt_polarity,
        }
        return self.assemble(tuple(results), config, Timing(started, _now(), tuple(timings)))

    @staticmethod
    def assemble(results: Tuple[DatasetResult, ...], config: Dict, timing: Optional[Timing] = None,
                 strict: bool = False) -> RunReport:
        """Attach averages, ranks and provenance to a set of dataset results.

        With ``strict`` an incomplete means grid raises AggregationError;
        otherwise averages and ranks are left empty and a warning is logged.
        """
        report = RunReport(results=results, averages={}, ranks={},
                           provenance=Provenance(__version__, config_hash(config), config, hardware_note()),
                           timing=timing or Timing())
        table = report.means_frame()
        try:
            averages = aggregate_metrics(table)
            ranks = rank_methods(table)
        except AggregationError as e:
            if strict:
                raise
            logger.warning("aggregation_skipped", reason=str(e))
            return report

        return RunReport(
            results=results,
            averages={method: {metric: float(row[metric]) for metric in METRIC_NAMES}
                      for method, row in averages.iterrows()},
            ranks={method: float(rank) for method, rank in ranks.items()},
            provenance=report.provenance,
            timing=report.timing,
        )
