"""
Patch protocol: split images into fixed-size overlapping patches, stitch
per-patch outputs back together, and apply flip/rotation augmentations.

Edge patches stay full-size: the last origin on each axis is flush with the
far edge, and images smaller than a patch are mirror-padded at the bottom
and right. The mirror includes the edge pixel (numpy "symmetric" mode), so
row h of a padded patch repeats row h-1.
"""

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from core.errors import ConfigError, FormatError, ShapeError
from core.imagecore import BinaryImage, RasterImage, image_files, load_image, save_binary, save_raster
from core.utils import canonical_json, save_text
from monitor.logger import get_logger

logger = get_logger(__name__)

GRID_SUFFIX = ".grid.json"
STITCH_CUT = 0.5


def axis_origins(length: int, patch_size: int, stride: int) -> List[int]:
    """Patch starts along one axis: multiples of stride plus a final flush origin."""
    padded = max(length, patch_size)
    origins = list(range(0, padded - patch_size + 1, stride))
    if origins[-1] != padded - patch_size:
        origins.append(padded - patch_size)
    return origins


@dataclass(frozen=True)
class PatchGrid:
    """Patch layout over one source image; origins are (x, y) in row-major order."""
    patch_size: int
    stride: int
    width: int
    height: int
    origins: Tuple[Tuple[int, int], ...]

    @property
    def padded_width(self) -> int:
        return max(self.width, self.patch_size)

    @property
    def padded_height(self) -> int:
        return max(self.height, self.patch_size)

    def __len__(self) -> int:
        return len(self.origins)

    @classmethod
    def plan(cls, width: int, height: int, patch_size: int, stride: int) -> "PatchGrid":
        if patch_size < 1:
            raise ConfigError(f"Patch size must be at least 1, got {patch_size}")
        if not 1 <= stride <= patch_size:
            raise ConfigError(f"Stride must lie in [1, {patch_size}], got {stride}")
        xs = axis_origins(width, patch_size, stride)
        ys = axis_origins(height, patch_size, stride)
        return cls(patch_size, stride, width, height, tuple((x, y) for y in ys for x in xs))

    def to_dict(self) -> Dict:
        return {
            "patch_size": self.patch_size,
            "stride": self.stride,
            "width": self.width,
            "height": self.height,
            "origins": [list(origin) for origin in self.origins],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "PatchGrid":
        return cls(
            patch_size=int(data["patch_size"]),
            stride=int(data["stride"]),
            width=int(data["width"]),
            height=int(data["height"]),
            origins=tuple((int(x), int(y)) for x, y in data["origins"]),
        )


def split_array(array: np.ndarray, patch_size: int, stride: int) -> Tuple[PatchGrid, List[np.ndarray]]:
    """Split any 2-D array into full-size patches."""
    array = np.asarray(array)
    if array.ndim != 2:
        raise ShapeError(f"Can only split 2-D grids, got shape {array.shape}")
    height, width = array.shape
    grid = PatchGrid.plan(width, height, patch_size, stride)

    padded = np.pad(array, ((0, grid.padded_height - height), (0, grid.padded_width - width)), mode="symmetric")
    patches = [padded[y:y + patch_size, x:x + patch_size].copy() for x, y in grid.origins]
    return grid, patches


def split(image: RasterImage, patch_size: int, stride: int) -> Tuple[PatchGrid, List[RasterImage]]:
    """Split a raster into ``patch_size`` x ``patch_size`` patches.

    Raises:
        ConfigError: If patch_size < 1 or stride is outside [1, patch_size]
    """
    grid, patches = split_array(image.intensities, patch_size, stride)
    return grid, [RasterImage(patch) for patch in patches]


def stitch(grid: PatchGrid, patch_outputs: Sequence[np.ndarray]) -> BinaryImage:
    """Average overlapping per-patch foreground maps; foreground where the mean is >= 0.5.

    Raises:
        ShapeError: If the outputs do not match the grid in count or size
    """
    if len(patch_outputs) != len(grid):
        raise ShapeError(f"Grid has {len(grid)} patches but {len(patch_outputs)} outputs were given")

    size = grid.patch_size
    total = np.zeros((grid.padded_height, grid.padded_width), dtype=np.float64)
    hits = np.zeros_like(total)
    for index, ((x, y), output) in enumerate(zip(grid.origins, patch_outputs)):
        output = np.asarray(output, dtype=np.float64)
        if output.shape != (size, size):
            raise ShapeError(f"Patch output {index} has shape {output.shape}, expected {(size, size)}")
        total[y:y + size, x:x + size] += output
        hits[y:y + size, x:x + size] += 1.0

    average = total[:grid.height, :grid.width] / hits[:grid.height, :grid.width]
    return BinaryImage(average >= STITCH_CUT)


class Augmentation(str, Enum):
    HFLIP = "hflip"
    VFLIP = "vflip"
    ROT90 = "rot90"
    ROT180 = "rot180"
    ROT270 = "rot270"
    TRANSPOSE = "transpose"
    TRANSVERSE = "transverse"

    @property
    def needs_square(self) -> bool:
        return self not in (Augmentation.HFLIP, Augmentation.VFLIP)


# With identity these seven form the full symmetry group of the square.
_INVERSES = {
    Augmentation.HFLIP: Augmentation.HFLIP,
    Augmentation.VFLIP: Augmentation.VFLIP,
    Augmentation.ROT90: Augmentation.ROT270,
    Augmentation.ROT180: Augmentation.ROT180,
    Augmentation.ROT270: Augmentation.ROT90,
    Augmentation.TRANSPOSE: Augmentation.TRANSPOSE,
    Augmentation.TRANSVERSE: Augmentation.TRANSVERSE,
}

Patch = Union[np.ndarray, RasterImage, BinaryImage]


def inverse(op: Augmentation) -> Augmentation:
    return _INVERSES[Augmentation(op)]


def _transform(array: np.ndarray, op: Augmentation) -> np.ndarray:
    if op.needs_square and array.shape[0] != array.shape[1]:
        raise ShapeError(f"{op.value} needs a square patch, got shape {array.shape}")
    if op is Augmentation.HFLIP:
        return np.fliplr(array)
    if op is Augmentation.VFLIP:
        return np.flipud(array)
    if op is Augmentation.TRANSPOSE:
        return array.T
    if op is Augmentation.TRANSVERSE:
        # Mirror across the anti-diagonal
        return np.rot90(array, k=2).T
    # Clockwise quarter turns
    turns = {Augmentation.ROT90: 1, Augmentation.ROT180: 2, Augmentation.ROT270: 3}[op]
    return np.rot90(array, k=-turns)


def augment(patch: Patch, op: Union[Augmentation, str]) -> Patch:
    """Apply one flip, diagonal mirror or clockwise rotation; returns the same type it was given."""
    op = Augmentation(op)
    if isinstance(patch, RasterImage):
        return RasterImage(_transform(patch.intensities, op))
    if isinstance(patch, BinaryImage):
        return BinaryImage(_transform(patch.labels, op))
    return np.ascontiguousarray(_transform(np.asarray(patch), op))


def augment_all(patch: Patch) -> Dict[Augmentation, Patch]:
    """Every augmentation of one patch, keyed by operation."""
    return {op: augment(patch, op) for op in Augmentation}


def patch_filename(stem: str, index: int, op: Augmentation = None) -> str:
    if op is None:
        return f"{stem}_{index:04d}.png"
    return f"{stem}_{index:04d}_{op.value}.png"


def split_directory(input_dir: Path, output_dir: Path, patch_size: int, stride: int,
                    augment_patches: bool = False) -> int:
    """Split every image of a directory, writing patches plus a grid sidecar per image.

    Returns:
        Number of source images split
    """
    input_dir = Path(input_dir)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    count = 0
    for path in image_files(input_dir):
        grid, patches = split(load_image(path), patch_size, stride)
        stem = path.stem
        for index, patch in enumerate(patches):
            save_raster(patch, output_dir / patch_filename(stem, index))
            if augment_patches and patch.width == patch.height:
                for op, variant in augment_all(patch).items():
                    save_raster(variant, output_dir / patch_filename(stem, index, op))
        sidecar = dict(grid.to_dict(), source=path.name)
        save_text(canonical_json(sidecar).encode("utf-8"), str(output_dir / f"{stem}{GRID_SUFFIX}"))
        logger.info("image_split", image=path.name, patches=len(patches))
        count += 1
    return count


def load_grid(path: Path) -> PatchGrid:
    try:
        return PatchGrid.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise FormatError(path, f"invalid patch grid sidecar: {e}")


def stitch_directory(patch_dir: Path, output_dir: Path) -> int:
    """Stitch per-patch prediction images back into full binary images.

    Patch files hold 8-bit predictions where dark means ink; each is read as a
    foreground probability (255 - v) / 255.

    Returns:
        Number of images written
    """
    patch_dir = Path(patch_dir)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    count = 0
    for sidecar in sorted(patch_dir.glob(f"*{GRID_SUFFIX}")):
        stem = sidecar.name[:-len(GRID_SUFFIX)]
        grid = load_grid(sidecar)
        outputs = []
        for index in range(len(grid)):
            patch = load_image(patch_dir / patch_filename(stem, index))
            outputs.append((255.0 - patch.intensities.astype(np.float64)) / 255.0)
        save_binary(stitch(grid, outputs), output_dir / f"{stem}.png")
        logger.info("image_stitched", image=stem, patches=len(outputs))
        count += 1
    return count
