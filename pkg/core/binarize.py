"""
Classical binarizers and threshold-map machinery.

- Otsu global thresholding over the 256-bin histogram
- Sauvola local thresholding with integral-image windowed statistics
- Multi-window Sauvola fusion with fixed per-window weights
- Hinge scoring of a threshold map against ground truth

A threshold map marks a pixel as ink when its intensity is strictly below
the map value at that pixel.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from core.errors import ConfigError, ShapeError
from core.imagecore import BinaryImage, RasterImage, ensure_same_shape
from core.patchwork import split, stitch
from monitor.logger import get_logger

logger = get_logger(__name__)

HISTOGRAM_BINS = 256
WEIGHT_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SauvolaParams:
    """Window size, sensitivity and dynamic range of one Sauvola threshold."""
    window: int = 25
    k: float = 0.2
    r: float = 128.0

    def __post_init__(self):
        if not isinstance(self.window, (int, np.integer)) or self.window < 3 or self.window % 2 == 0:
            raise ConfigError(f"Sauvola window must be an odd integer >= 3, got {self.window}")
        if not self.r > 0:
            raise ConfigError(f"Sauvola dynamic range r must be positive, got {self.r}")
        if not math.isfinite(self.k):
            raise ConfigError(f"Sauvola k must be finite, got {self.k}")


@dataclass(frozen=True, eq=False)
class ThresholdMap:
    """Per-pixel real-valued threshold surface."""
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ShapeError(f"ThresholdMap needs a 2-D grid, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def shape(self):
        return self.values.shape

    def normalized(self) -> "ThresholdMap":
        """Thresholds on the [0, 1] scale of ``normalize_image``."""
        return ThresholdMap(self.values / 255.0)

    @classmethod
    def constant(cls, shape: Tuple[int, int], value: float) -> "ThresholdMap":
        return cls(np.full(shape, value, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Cumulative sums and squared sums with a leading zero row and column.

    Both tables use int64 so every rectangle sum is exact.
    """
    sums: np.ndarray = field(repr=False)
    squares: np.ndarray = field(repr=False)

    @property
    def height(self) -> int:
        return self.sums.shape[0] - 1

    @property
    def width(self) -> int:
        return self.sums.shape[1] - 1

    def rect_sum(self, top: int, left: int, bottom: int, right: int) -> Tuple[int, int]:
        """Sum and squared sum over rows [top, bottom) and columns [left, right)."""
        s = self.sums
        q = self.squares
        total = s[bottom, right] - s[top, right] - s[bottom, left] + s[top, left]
        squared = q[bottom, right] - q[top, right] - q[bottom, left] + q[top, left]
        return int(total), int(squared)

    def _bounds(self, length: int, window: int) -> Tuple[np.ndarray, np.ndarray]:
        half = window // 2
        centers = np.arange(length)
        return np.maximum(centers - half, 0), np.minimum(centers + half + 1, length)

    def window_stats(self, window: int) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and population stddev of the clamped window centred on every pixel."""
        r0, r1 = self._bounds(self.height, window)
        c0, c1 = self._bounds(self.width, window)

        def box(table: np.ndarray) -> np.ndarray:
            return (table[np.ix_(r1, c1)] - table[np.ix_(r0, c1)]
                    - table[np.ix_(r1, c0)] + table[np.ix_(r0, c0)])

        total = box(self.sums)
        squared = box(self.squares)
        count = np.outer(r1 - r0, c1 - c0).astype(np.int64)

        mean = total / count
        # count * squared - total**2 is an exact non-negative integer
        spread = count * squared - total * total
        std = np.sqrt(spread.astype(np.float64)) / count
        return mean, std

    def stats_at(self, x: int, y: int, window: int) -> Tuple[float, float]:
        """Mean and stddev of the clamped window centred on column x, row y."""
        half = window // 2
        top, bottom = max(y - half, 0), min(y + half + 1, self.height)
        left, right = max(x - half, 0), min(x + half + 1, self.width)
        total, squared = self.rect_sum(top, left, bottom, right)
        count = (bottom - top) * (right - left)
        return total / count, math.sqrt(count * squared - total * total) / count


def normalize_image(image: RasterImage) -> np.ndarray:
    """Intensities scaled to [0, 1]."""
    return image.normalized()


def otsu_threshold(image: RasterImage) -> Optional[int]:
    """Threshold maximizing between-class variance; pixels <= t are foreground.

    When several thresholds share the maximum, the midpoint of the first run
    of tied thresholds is returned.

    Returns:
        Threshold in [0, 255], or None for a constant image
    """
    histogram = np.bincount(image.intensities.ravel(), minlength=HISTOGRAM_BINS).astype(np.int64)
    levels = np.arange(HISTOGRAM_BINS, dtype=np.int64)
    n0 = np.cumsum(histogram).tolist()
    s0 = np.cumsum(histogram * levels).tolist()
    total_count = n0[-1]
    total_sum = s0[-1]

    # Between-class variance up to a positive constant, computed on Python ints
    scores = []
    for t in range(HISTOGRAM_BINS):
        below = n0[t]
        above = total_count - below
        if below == 0 or above == 0:
            scores.append(-1.0)
            continue
        spread = total_sum * below - total_count * s0[t]
        scores.append(float(spread * spread) / float(below * above))

    best = max(scores)
    if best < 0:
        return None

    start = scores.index(best)
    end = start
    while end + 1 < HISTOGRAM_BINS and scores[end + 1] == best:
        end += 1
    return (start + end) // 2


def otsu_threshold_map(image: RasterImage) -> ThresholdMap:
    """Otsu's global threshold expressed as a constant map.

    A constant image maps to 0 everywhere, so nothing is ink.
    """
    t = otsu_threshold(image)
    return ThresholdMap.constant(image.shape, 0.0 if t is None else t + 1.0)


def otsu_binarize(image: RasterImage) -> BinaryImage:
    """Global Otsu binarization; a constant image is all background."""
    return apply_threshold_map(image, otsu_threshold_map(image))


def integral_stats(image: RasterImage) -> IntegralImage:
    """Build the integral tables of an image."""
    values = image.intensities.astype(np.int64)
    sums = np.zeros((image.height + 1, image.width + 1), dtype=np.int64)
    squares = np.zeros_like(sums)
    sums[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
    squares[1:, 1:] = (values * values).cumsum(axis=0).cumsum(axis=1)
    sums.setflags(write=False)
    squares.setflags(write=False)
    return IntegralImage(sums=sums, squares=squares)


def sauvola_formula(mean, std, k: float, r: float):
    """T = m * (1 + k * (s / R - 1))."""
    return mean * (1.0 + k * (std / r - 1.0))


def sauvola_threshold_map(image: RasterImage, params: SauvolaParams,
                          integral: Optional[IntegralImage] = None) -> ThresholdMap:
    """Per-pixel Sauvola threshold from clamped-window statistics."""
    integral = integral or integral_stats(image)
    mean, std = integral.window_stats(params.window)
    return ThresholdMap(sauvola_formula(mean, std, params.k, params.r))


def apply_threshold_map(image: RasterImage, threshold: ThresholdMap) -> BinaryImage:
    """Ink where intensity < T; ties go to background."""
    ensure_same_shape(image, threshold, "image and threshold map")
    return BinaryImage(image.intensities.astype(np.float64) < threshold.values)


def sauvola_binarize(image: RasterImage, params: Optional[SauvolaParams] = None) -> BinaryImage:
    params = params or SauvolaParams(settings.sauvola_window, settings.sauvola_k, settings.sauvola_r)
    return apply_threshold_map(image, sauvola_threshold_map(image, params))


def _check_weights(count: int, weights: Optional[Sequence[float]]) -> List[float]:
    if count < 1:
        raise ConfigError("Multi-window thresholding needs at least one window")
    if weights is None or len(weights) == 0:
        return [1.0 / count] * count

    weights = [float(w) for w in weights]
    if len(weights) != count:
        raise ConfigError(f"Got {len(weights)} weights for {count} windows")
    if any(w < 0 or not math.isfinite(w) for w in weights):
        raise ConfigError(f"Window weights must be finite and non-negative: {weights}")
    if abs(sum(weights) - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ConfigError(f"Window weights must sum to 1, got {sum(weights)!r}")
    return weights


def multi_window_threshold(image: RasterImage, windows: Sequence[SauvolaParams],
                           weights: Optional[Sequence[float]] = None) -> ThresholdMap:
    """Fixed-weight fusion of Sauvola maps over a bank of windows.

    Args:
        image: Source raster
        windows: One parameter set per window
        weights: Non-negative weights summing to 1; None or empty means uniform

    Raises:
        ConfigError: If the weights do not match the windows or do not sum to 1
    """
    weights = _check_weights(len(windows), weights)
    integral = integral_stats(image)

    fused = np.zeros(image.shape, dtype=np.float64)
    for params, weight in zip(windows, weights):
        fused += weight * sauvola_threshold_map(image, params, integral).values
    return ThresholdMap(fused)


def multi_window_binarize(image: RasterImage, windows: Sequence[SauvolaParams],
                          weights: Optional[Sequence[float]] = None) -> BinaryImage:
    return apply_threshold_map(image, multi_window_threshold(image, windows, weights))


def hinge_loss_map(d: np.ndarray, threshold: ThresholdMap, gt: BinaryImage, alpha: float) -> np.ndarray:
    """Per-pixel loss max(1 - alpha * (D - T) * B, 0) with B = -1 on ink, +1 on support.

    ``d`` and ``threshold`` must share one scale, normally [0, 1].
    """
    if not alpha > 0:
        raise ConfigError(f"Hinge alpha must be positive, got {alpha}")
    d = np.asarray(d, dtype=np.float64)
    ensure_same_shape(d, threshold, "normalized image and threshold map")
    ensure_same_shape(d, gt, "normalized image and ground truth")
    margin = alpha * (d - threshold.values) * gt.to_signed()
    return np.maximum(1.0 - margin, 0.0)


def hinge_loss(d: np.ndarray, threshold: ThresholdMap, gt: BinaryImage, alpha: float = 16.0) -> float:
    """Mean of ``hinge_loss_map``."""
    return float(hinge_loss_map(d, threshold, gt, alpha).mean())


class Method(str, Enum):
    OTSU = "otsu"
    SAUVOLA = "sauvola"
    MWS = "mws"


@dataclass(frozen=True)
class BinarizerConfig:
    """Builtin binarizer selection and its parameters."""
    method: Method = Method.SAUVOLA
    sauvola: SauvolaParams = field(default_factory=SauvolaParams)
    windows: Tuple[int, ...] = (7, 15, 31, 63)
    weights: Tuple[float, ...] = ()

    @classmethod
    def build(cls, method: str, window: Optional[int] = None, k: Optional[float] = None,
              r: Optional[float] = None, windows: Optional[Sequence[int]] = None,
              weights: Optional[Sequence[float]] = None) -> "BinarizerConfig":
        """Fill unset parameters from ``settings`` and validate the result."""
        try:
            chosen = Method(method)
        except ValueError:
            raise ConfigError(f"Unknown method '{method}'; expected one of otsu, sauvola, mws")

        config = cls(
            method=chosen,
            sauvola=SauvolaParams(
                window=settings.sauvola_window if window is None else int(window),
                k=settings.sauvola_k if k is None else float(k),
                r=settings.sauvola_r if r is None else float(r),
            ),
            windows=tuple(int(w) for w in (settings.mws_windows if windows is None else windows)),
            weights=tuple(float(w) for w in (settings.mws_weights if weights is None else weights)),
        )
        if chosen is Method.MWS:
            # Validates every window and the weight vector up front
            _check_weights(len(config.window_params()), config.weights)
        return config

    def window_params(self) -> List[SauvolaParams]:
        return [SauvolaParams(window=w, k=self.sauvola.k, r=self.sauvola.r) for w in self.windows]

    def describe(self) -> dict:
        data = {"method": self.method.value}
        if self.method is Method.SAUVOLA:
            data.update(window=self.sauvola.window, k=self.sauvola.k, r=self.sauvola.r)
        elif self.method is Method.MWS:
            data.update(windows=list(self.windows), weights=list(self.weights), k=self.sauvola.k, r=self.sauvola.r)
        return data


class Binarizer:
    """Runs one builtin method, optionally through the patch protocol."""

    def __init__(self, config: Optional[BinarizerConfig] = None):
        self.config = config or BinarizerConfig()

    @property
    def name(self) -> str:
        return self.config.method.value

    def threshold_map(self, image: RasterImage) -> ThresholdMap:
        method = self.config.method
        if method is Method.OTSU:
            return otsu_threshold_map(image)
        if method is Method.SAUVOLA:
            return sauvola_threshold_map(image, self.config.sauvola)
        return multi_window_threshold(image, self.config.window_params(), self.config.weights)

    def binarize_whole(self, image: RasterImage) -> BinaryImage:
        method = self.config.method
        if method is Method.OTSU:
            return otsu_binarize(image)
        if method is Method.SAUVOLA:
            return sauvola_binarize(image, self.config.sauvola)
        return multi_window_binarize(image, self.config.window_params(), self.config.weights)

    def foreground_map(self, image: RasterImage) -> np.ndarray:
        """Hard 0/1 foreground map of a whole image."""
        return self.binarize_whole(image).as_float()

    def binarize(self, image: RasterImage, patch_size: Optional[int] = None,
                 stride: Optional[int] = None) -> BinaryImage:
        """Binarize a whole image, or patch by patch when ``patch_size`` is given.

        Raises:
            ConfigError: If a patch size is given without a stride
        """
        if patch_size is None:
            return self.binarize_whole(image)
        if stride is None:
            raise ConfigError("Patch-wise binarization needs an explicit stride")

        grid, patches = split(image, patch_size, stride)
        outputs = [self.foreground_map(patch) for patch in patches]
        logger.debug("patches_binarized", method=self.name, patches=len(outputs))
        return stitch(grid, outputs)

    def hinge(self, image: RasterImage, gt: BinaryImage, alpha: Optional[float] = None) -> float:
        """Hinge loss of this method's threshold map against ground truth."""
        alpha = settings.hinge_alpha if alpha is None else alpha
        return hinge_loss(normalize_image(image), self.threshold_map(image).normalized(), gt, alpha)
