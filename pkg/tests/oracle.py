"""
Naive reference implementations used to validate the optimized paths.

Each one is a direct transcription of a definition: explicit loops over
windows, neighbourhoods and foreground pixels. They refuse inputs larger
than ``OracleConfig.max_dimension`` to keep the suite fast.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from config.settings import settings
from core.binarize import SauvolaParams, ThresholdMap
from core.errors import DegenerateInputError, OracleBoundsError, UndefinedMetricError
from core.imagecore import BinaryImage, RasterImage
from core.metrics import DistanceField


@dataclass(frozen=True)
class OracleConfig:
    max_dimension: int = settings.oracle_max_dimension


def _check_bounds(shape, config: Optional[OracleConfig]) -> None:
    limit = (config or OracleConfig()).max_dimension
    if max(shape[:2]) > limit:
        raise OracleBoundsError(f"Oracle input {shape} exceeds max dimension {limit}")


def naive_window_stats(image: RasterImage, window: int, x: int, y: int,
                       config: Optional[OracleConfig] = None) -> Tuple[float, float]:
    """Mean and population stddev over the clamped window centred on (x, y)."""
    _check_bounds(image.shape, config)
    half = window // 2
    values = []
    for row in range(max(y - half, 0), min(y + half + 1, image.height)):
        for col in range(max(x - half, 0), min(x + half + 1, image.width)):
            values.append(int(image.intensities[row, col]))
    mean = sum(values) / len(values)
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(variance)


def naive_sauvola_threshold(image: RasterImage, params: SauvolaParams,
                            config: Optional[OracleConfig] = None) -> ThresholdMap:
    """Sauvola map from a fresh window slice at every pixel."""
    _check_bounds(image.shape, config)
    half = params.window // 2
    values = image.intensities.astype(np.int64)
    out = np.empty(image.shape, dtype=np.float64)
    for row in range(image.height):
        for col in range(image.width):
            patch = values[max(row - half, 0):row + half + 1, max(col - half, 0):col + half + 1]
            mean = int(patch.sum()) / patch.size
            std = math.sqrt(float(((patch - mean) ** 2).sum()) / patch.size)
            out[row, col] = mean * (1.0 + params.k * (std / params.r - 1.0))
    return ThresholdMap(out)


def naive_distance_transform(reference: BinaryImage, config: Optional[OracleConfig] = None) -> DistanceField:
    """Minimum Euclidean distance to every foreground pixel, pixel by pixel."""
    _check_bounds(reference.shape, config)
    rows, cols = np.nonzero(reference.labels)
    if rows.size == 0:
        raise DegenerateInputError("distance transform needs at least one foreground pixel")

    out = np.empty(reference.shape, dtype=np.float64)
    for row in range(reference.height):
        for col in range(reference.width):
            squared = (rows - row) ** 2 + (cols - col) ** 2
            out[row, col] = math.sqrt(int(squared.min()))
    return DistanceField(out)


def naive_nubn(gt: BinaryImage) -> int:
    count = 0
    for top in range(0, gt.height, 8):
        for left in range(0, gt.width, 8):
            block = gt.labels[top:top + 8, left:left + 8]
            if block.any() and not block.all():
                count += 1
    return count


def naive_drd(pred: BinaryImage, gt: BinaryImage, config: Optional[OracleConfig] = None) -> float:
    """Distortion of every flipped pixel over its 5x5 neighbourhood, divided by NUBN."""
    _check_bounds(gt.shape, config)
    weights = [[0.0] * 5 for _ in range(5)]
    for i in range(5):
        for j in range(5):
            if (i, j) != (2, 2):
                weights[i][j] = 1.0 / math.sqrt((i - 2) ** 2 + (j - 2) ** 2)
    total_weight = sum(sum(row) for row in weights)

    blocks = naive_nubn(gt)
    if blocks == 0:
        raise UndefinedMetricError("NUBN = 0")

    total = 0.0
    for row in range(gt.height):
        for col in range(gt.width):
            value = pred.labels[row, col]
            if value == gt.labels[row, col]:
                continue
            for i in range(5):
                for j in range(5):
                    r, c = row + i - 2, col + j - 2
                    if 0 <= r < gt.height and 0 <= c < gt.width and gt.labels[r, c] != value:
                        total += weights[i][j] / total_weight
    return total / blocks
