"""
Image model, file I/O and ground-truth/prediction decoding conventions.

Grayscale rasters and binary label images are immutable numpy-backed
dataclasses. Binary labels are stored as a boolean grid where True marks
foreground (ink) and False marks background (support).
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from core.errors import FormatError, ImageIOError, ShapeError

SUPPORTED_SUFFIXES = (".png", ".bmp", ".tif", ".tiff")
FOREGROUND_CUT = 128
LUMINANCE_WEIGHTS = (0.299, 0.587, 0.114)

PathLike = Union[str, Path]


class Polarity(str, Enum):
    """Which intensity side of the cut is foreground."""
    DARK = "dark"
    LIGHT = "light"


def _frozen_copy(array: np.ndarray, dtype) -> np.ndarray:
    copied = np.array(array, dtype=dtype, copy=True)
    copied.setflags(write=False)
    return copied


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit grayscale image, row-major (height, width)."""
    intensities: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.intensities)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"RasterImage needs a non-empty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("RasterImage intensities must lie in [0, 255]")
        object.__setattr__(self, "intensities", _frozen_copy(arr, np.uint8))

    @property
    def width(self) -> int:
        return int(self.intensities.shape[1])

    @property
    def height(self) -> int:
        return int(self.intensities.shape[0])

    @property
    def shape(self):
        return self.intensities.shape

    def is_constant(self) -> bool:
        return bool(self.intensities.min() == self.intensities.max())

    def normalized(self) -> np.ndarray:
        """Intensities scaled to [0, 1] as float64."""
        return self.intensities.astype(np.float64) / 255.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.intensities, other.intensities))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Two-label image; ``labels`` is True on foreground pixels."""
    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"BinaryImage needs a non-empty 2-D grid, got shape {arr.shape}")
        object.__setattr__(self, "labels", _frozen_copy(arr, bool))

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def shape(self):
        return self.labels.shape

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.labels))

    def has_foreground(self) -> bool:
        return self.foreground_count > 0

    def is_mixed(self) -> bool:
        """True when both labels occur."""
        return 0 < self.foreground_count < self.labels.size

    def as_float(self) -> np.ndarray:
        """Foreground as 1.0, background as 0.0."""
        return self.labels.astype(np.float64)

    def to_signed(self) -> np.ndarray:
        """Hinge-loss encoding: foreground -> -1, background -> +1."""
        return np.where(self.labels, -1, 1).astype(np.int8)

    def inverted(self) -> "BinaryImage":
        return BinaryImage(~self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.labels, other.labels))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RgbImage:
    """24-bit color image, (height, width, 3)."""
    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ShapeError(f"RgbImage needs a (height, width, 3) grid, got shape {arr.shape}")
        object.__setattr__(self, "pixels", _frozen_copy(arr, np.uint8))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, RgbImage):
            return NotImplemented
        return bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None


@dataclass(frozen=True)
class DatasetEntry:
    """One (image, ground truth) pair, identified by the shared file stem."""
    id: str
    image_path: Optional[Path]
    gt_path: Path


def ensure_same_shape(first, second, what: str = "images") -> None:
    """Raise ShapeError unless both objects share (height, width)."""
    first_shape = tuple(first.shape[:2])
    second_shape = tuple(second.shape[:2])
    if first_shape != second_shape:
        raise ShapeError(f"Dimension mismatch between {what}: {first_shape} vs {second_shape}")


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Reduce an (H, W, 3) RGB array to 8-bit gray with BT.601 weights.

    Rounds to nearest, halves away from zero, so that gray pixels (v, v, v)
    map back to v.
    """
    weights = np.asarray(LUMINANCE_WEIGHTS, dtype=np.float64)
    gray = rgb[..., :3].astype(np.float64) @ weights
    return np.clip(np.floor(gray + 0.5), 0, 255).astype(np.uint8)


def load_image(path: PathLike) -> RasterImage:
    """Load a PNG/BMP/TIFF file as an 8-bit grayscale raster.

    Args:
        path: Image file path

    Returns:
        RasterImage with RGB inputs reduced by luminance

    Raises:
        ImageIOError: If the file is missing or unreadable
        FormatError: If the bit depth or format is unsupported
    """
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise FormatError(path, f"extension '{path.suffix}' is not PNG, BMP or TIFF")

    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode == "L":
                return RasterImage(np.asarray(img, dtype=np.uint8))
            if mode == "RGB":
                return RasterImage(luminance(np.asarray(img, dtype=np.uint8)))
            if mode == "1":
                # Bilevel files expand to 0/255
                return RasterImage(np.where(np.asarray(img, dtype=bool), 255, 0).astype(np.uint8))
            raise FormatError(path, f"mode '{mode}' is not 8-bit grayscale or 24-bit RGB")
    except FormatError:
        raise
    except FileNotFoundError:
        raise ImageIOError(path, "file not found")
    except (UnidentifiedImageError, OSError) as e:
        raise ImageIOError(path, str(e))


def decode_binary(image: RasterImage, polarity: Polarity = Polarity.DARK) -> BinaryImage:
    """Cut a raster at 128: dark pixels are foreground unless polarity is LIGHT."""
    dark = image.intensities < FOREGROUND_CUT
    return BinaryImage(dark if Polarity(polarity) is Polarity.DARK else ~dark)


def encode_binary(image: BinaryImage) -> np.ndarray:
    """Foreground -> 0, background -> 255."""
    return np.where(image.labels, 0, 255).astype(np.uint8)


def _write(array: np.ndarray, path: PathLike) -> None:
    path = Path(path)
    if not path.parent.exists():
        raise ImageIOError(path, "parent directory does not exist")
    try:
        Image.fromarray(array).save(path, format="PNG")
    except (OSError, ValueError) as e:
        raise ImageIOError(path, str(e))


def save_binary(image: BinaryImage, path: PathLike) -> None:
    """Write an 8-bit grayscale PNG with foreground=0 and background=255."""
    _write(encode_binary(image), path)


def save_raster(image: RasterImage, path: PathLike) -> None:
    """Write an 8-bit grayscale PNG."""
    _write(np.ascontiguousarray(image.intensities), path)


def save_rgb(image: RgbImage, path: PathLike) -> None:
    """Write a 24-bit RGB PNG."""
    _write(np.ascontiguousarray(image.pixels), path)


def image_files(directory: PathLike):
    """Sorted supported image files directly inside a directory."""
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES)


def image_size(path: PathLike):
    """(height, width) of an image file without decoding its pixels."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            width, height = img.size
    except FileNotFoundError:
        raise ImageIOError(path, "file not found")
    except (UnidentifiedImageError, OSError) as e:
        raise ImageIOError(path, str(e))
    return height, width
