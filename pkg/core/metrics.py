"""
DIBCO evaluation metrics: F-measure, pseudo F-measure, PSNR and DRD.

Supporting constructs live here too: confusion counts, the Euclidean
distance transform, the stroke-width estimate, the pFM weight maps, the
NUBN block count and the DRD reciprocal-distance weight matrix.

All functions are pure and operate on immutable ``BinaryImage`` inputs, so
image pairs can be scored concurrently.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Union

import numpy as np
from scipy import ndimage

from core.errors import DegenerateInputError, UndefinedMetricError
from core.imagecore import BinaryImage, ensure_same_shape

DRD_BLOCK_SIZE = 8
DRD_NEIGHBORHOOD = 5
PSNR_CONTRAST = 1.0
PSNR_INFINITY = math.inf

METRIC_NAMES = ("psnr", "fm", "pfm", "drd")
# Higher is better for every metric except DRD
HIGHER_IS_BETTER = {"psnr": True, "fm": True, "pfm": True, "drd": False}


@dataclass(frozen=True)
class Undefined:
    """Marker for a metric that cannot be computed for an input pair."""
    reason: str


MetricValue = Union[float, Undefined]


def is_defined(value: MetricValue) -> bool:
    """True for finite numbers; False for Undefined markers and the PSNR sentinel."""
    return not isinstance(value, Undefined) and math.isfinite(value)


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel counts of a prediction against ground truth."""
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


class FMeasure(NamedTuple):
    fm: float
    recall: float
    precision: float


class PseudoFMeasure(NamedTuple):
    pfm: float
    p_recall: float
    p_precision: float


@dataclass(frozen=True)
class MetricScores:
    """All metrics for one (prediction, ground truth) pair."""
    fm: MetricValue
    pfm: MetricValue
    psnr: MetricValue
    drd: MetricValue
    recall: MetricValue
    precision: MetricValue
    p_recall: MetricValue
    p_precision: MetricValue
    counts: ConfusionCounts

    def value(self, metric: str) -> MetricValue:
        return getattr(self, metric)

    def undefined_reasons(self) -> Dict[str, str]:
        reasons = {}
        for name in ("fm", "pfm", "psnr", "drd", "recall", "precision", "p_recall", "p_precision"):
            value = getattr(self, name)
            if isinstance(value, Undefined):
                reasons[name] = value.reason
        return reasons


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-pixel Euclidean distance to the nearest foreground pixel."""
    distances: np.ndarray

    @property
    def shape(self):
        return self.distances.shape


@dataclass(frozen=True, eq=False)
class PfmWeightMaps:
    """Distance-based weights used by pseudo-recall and pseudo-precision."""
    recall_weights: np.ndarray
    precision_weights: np.ndarray
    stroke_width: int


@dataclass(frozen=True, eq=False)
class DrdWeightMatrix:
    """5x5 reciprocal-distance weights, centre 0, normalized to sum 1."""
    weights: np.ndarray = field(repr=False)


def confusion_counts(pred: BinaryImage, gt: BinaryImage) -> ConfusionCounts:
    """Count TP/FP/FN/TN pixels of ``pred`` against ``gt``."""
    ensure_same_shape(pred, gt, "prediction and ground truth")
    p = pred.labels
    g = gt.labels
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(p.size - tp - fp - fn)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def f_measure(counts: ConfusionCounts) -> FMeasure:
    """F-measure with its recall and precision.

    Raises:
        DegenerateInputError: If the ground truth or the prediction has no foreground
    """
    if counts.tp + counts.fn == 0:
        raise DegenerateInputError("ground truth has no foreground; recall is undefined")
    if counts.tp + counts.fp == 0:
        raise DegenerateInputError("prediction has no foreground; precision is undefined")

    recall = counts.tp / (counts.tp + counts.fn)
    precision = counts.tp / (counts.tp + counts.fp)
    if recall + precision == 0:
        return FMeasure(0.0, recall, precision)
    return FMeasure(2 * recall * precision / (recall + precision), recall, precision)


def psnr(pred: BinaryImage, gt: BinaryImage) -> float:
    """Peak signal-to-noise ratio in dB with images mapped to {0, 1} and C = 1.

    Identical images return ``PSNR_INFINITY``.
    """
    ensure_same_shape(pred, gt, "prediction and ground truth")
    mismatches = int(np.count_nonzero(pred.labels != gt.labels))
    if mismatches == 0:
        return PSNR_INFINITY
    mse = mismatches / pred.labels.size
    return 10.0 * math.log10(PSNR_CONTRAST ** 2 / mse)


def nubn(gt: BinaryImage) -> int:
    """Number of non-uniform 8x8 blocks; partial edge blocks count over their real pixels."""
    fg = gt.labels.astype(np.int64)
    height, width = fg.shape
    row_starts = np.arange(0, height, DRD_BLOCK_SIZE)
    col_starts = np.arange(0, width, DRD_BLOCK_SIZE)
    counts = np.add.reduceat(np.add.reduceat(fg, row_starts, axis=0), col_starts, axis=1)
    block_heights = np.diff(np.append(row_starts, height))
    block_widths = np.diff(np.append(col_starts, width))
    sizes = np.outer(block_heights, block_widths)
    return int(np.count_nonzero((counts > 0) & (counts < sizes)))


def drd_weight_matrix(normalized: bool = True) -> DrdWeightMatrix:
    """Reciprocal Euclidean distance to the centre of a 5x5 grid.

    Args:
        normalized: Scale entries to sum to 1 (the DRD definition)
    """
    center = DRD_NEIGHBORHOOD // 2
    rows, cols = np.mgrid[0:DRD_NEIGHBORHOOD, 0:DRD_NEIGHBORHOOD]
    distance = np.hypot(rows - center, cols - center)
    weights = np.zeros_like(distance)
    np.divide(1.0, distance, out=weights, where=distance > 0)
    if normalized:
        weights = weights / weights.sum()
    weights.setflags(write=False)
    return DrdWeightMatrix(weights)


_DRD_WEIGHTS = drd_weight_matrix().weights


def drd(pred: BinaryImage, gt: BinaryImage) -> float:
    """Distance reciprocal distortion, normalized by NUBN.

    For every flipped pixel the distortion is the weighted count of 5x5 GT
    neighbours that differ from the predicted value; positions outside the
    image contribute nothing.

    Raises:
        UndefinedMetricError: If the ground truth has no non-uniform block
    """
    ensure_same_shape(pred, gt, "prediction and ground truth")
    blocks = nubn(gt)
    if blocks == 0:
        raise UndefinedMetricError("ground truth has no non-uniform 8x8 block (NUBN = 0)")

    flipped = pred.labels != gt.labels
    if not flipped.any():
        return 0.0

    gt_fg = gt.labels.astype(np.float64)
    gt_bg = 1.0 - gt_fg
    # Weighted count of GT foreground / background neighbours, zero outside the image
    fg_mass = ndimage.correlate(gt_fg, _DRD_WEIGHTS, mode="constant", cval=0.0)
    bg_mass = ndimage.correlate(gt_bg, _DRD_WEIGHTS, mode="constant", cval=0.0)
    per_pixel = np.where(pred.labels, bg_mass, fg_mass)
    return float(per_pixel[flipped].sum() / blocks)


def distance_transform(reference: BinaryImage) -> DistanceField:
    """Exact Euclidean distance from every pixel to the nearest foreground pixel.

    Raises:
        DegenerateInputError: If the reference has no foreground
    """
    if not reference.has_foreground():
        raise DegenerateInputError("distance transform needs at least one foreground pixel")
    distances = ndimage.distance_transform_edt(~reference.labels)
    return DistanceField(np.asarray(distances, dtype=np.float64))


def interior_distance(gt: BinaryImage) -> np.ndarray:
    """Distance from each foreground pixel to the nearest background pixel.

    Everything outside the image counts as background; background pixels get 0.
    """
    padded = np.pad(gt.labels, 1, mode="constant", constant_values=False)
    inside = ndimage.distance_transform_edt(padded)
    return np.asarray(inside[1:-1, 1:-1], dtype=np.float64)


def stroke_width(gt: BinaryImage, interior: Optional[np.ndarray] = None) -> int:
    """Stroke width as twice the mean interior distance over ridge pixels.

    Ridge pixels are foreground pixels whose interior distance is not
    exceeded by any 8-neighbour.

    Raises:
        DegenerateInputError: If the ground truth has no foreground
    """
    if not gt.has_foreground():
        raise DegenerateInputError("stroke width needs at least one foreground pixel")
    if interior is None:
        interior = interior_distance(gt)

    neighborhood_max = ndimage.maximum_filter(interior, size=3, mode="constant", cval=0.0)
    ridge = gt.labels & (interior >= neighborhood_max)
    mean_depth = float(interior[ridge].mean())
    return max(1, int(math.floor(2.0 * mean_depth + 0.5)))


def pfm_weight_maps(gt: BinaryImage) -> PfmWeightMaps:
    """Recall weights decaying linearly to 0 at one stroke width from the text,
    precision weights ramping from 1 to 2 toward stroke centres."""
    distance = distance_transform(gt).distances
    interior = interior_distance(gt)
    width = stroke_width(gt, interior)

    recall_weights = np.where(gt.labels, 1.0, np.maximum(0.0, 1.0 - distance / width))
    precision_weights = np.where(gt.labels, 1.0 + np.minimum(1.0, 2.0 * interior / width), 1.0)
    return PfmWeightMaps(recall_weights=recall_weights, precision_weights=precision_weights,
                         stroke_width=width)


def pseudo_f_measure(pred: BinaryImage, gt: BinaryImage,
                     maps: Optional[PfmWeightMaps] = None) -> PseudoFMeasure:
    """Pseudo F-measure from distance-weighted recall and precision.

    Raises:
        DegenerateInputError: If the ground truth or the prediction has no foreground
    """
    ensure_same_shape(pred, gt, "prediction and ground truth")
    if not pred.has_foreground():
        raise DegenerateInputError("prediction has no foreground; pseudo-precision is undefined")
    if maps is None:
        maps = pfm_weight_maps(gt)

    p = pred.labels
    g = gt.labels
    p_recall = min(1.0, float(maps.recall_weights[p].sum() / maps.recall_weights[g].sum()))
    p_precision = float(maps.precision_weights[p & g].sum() / maps.precision_weights[p].sum())

    if p_recall + p_precision == 0:
        return PseudoFMeasure(0.0, p_recall, p_precision)
    return PseudoFMeasure(2 * p_recall * p_precision / (p_recall + p_precision), p_recall, p_precision)


def score_pair(pred: BinaryImage, gt: BinaryImage) -> MetricScores:
    """Score one prediction; degenerate sub-metrics become ``Undefined`` markers."""
    ensure_same_shape(pred, gt, "prediction and ground truth")
    counts = confusion_counts(pred, gt)

    try:
        fm, recall, precision = f_measure(counts)
    except DegenerateInputError as e:
        fm = recall = precision = Undefined(str(e))

    try:
        pfm, p_recall, p_precision = pseudo_f_measure(pred, gt)
    except DegenerateInputError as e:
        pfm = p_recall = p_precision = Undefined(str(e))

    try:
        drd_value: MetricValue = drd(pred, gt)
    except UndefinedMetricError as e:
        drd_value = Undefined(str(e))

    return MetricScores(
        fm=fm,
        pfm=pfm,
        psnr=psnr(pred, gt),
        drd=drd_value,
        recall=recall,
        precision=precision,
        p_recall=p_recall,
        p_precision=p_precision,
        counts=counts,
    )
