"""
Synthetic document corpus with exact ground truth.

Text lines are rendered with OpenCV; the rendered mask is the ground truth.
Ink and support intensities are drawn from Gaussians, and an optional
horizontal illumination gradient and bleed-through layer degrade the page.
"""

import string
from pathlib import Path
from typing import List, Tuple

import cv2
import numpy as np

from core.imagecore import BinaryImage, DatasetEntry, RasterImage, save_binary, save_raster
from monitor.logger import get_logger

logger = get_logger(__name__)

INK_MEAN = 60.0
SUPPORT_MEAN = 200.0
NOISE_SIGMA = 10.0
BLEED_DARKENING = 45.0
LINE_SPACING = 30
MARGIN = 8


def _render_text(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    canvas = np.zeros((height, width), dtype=np.uint8)
    letters = string.ascii_letters + string.digits
    y = LINE_SPACING - 6
    while y < height - MARGIN:
        words = []
        for _ in range(int(rng.integers(3, 9))):
            words.append("".join(rng.choice(list(letters), size=int(rng.integers(2, 8)))))
        scale = float(rng.uniform(0.55, 0.8))
        cv2.putText(canvas, " ".join(words), (MARGIN, y), cv2.FONT_HERSHEY_SIMPLEX, scale, 255,
                    thickness=2, lineType=cv2.LINE_8)
        y += LINE_SPACING
    return canvas > 0


def generate_document(seed: int, size: Tuple[int, int] = (128, 256), gradient: float = 0.0,
                      bleed_through: bool = False) -> Tuple[RasterImage, BinaryImage]:
    """One synthetic page and its ground truth.

    Args:
        seed: Random seed; equal seeds give identical pages
        size: (height, width)
        gradient: Ramp amplitude; the offset runs from -gradient at the left edge to +gradient at
            the right, so the total span is 2 * gradient gray levels
        bleed_through: Add faint mirrored strokes from a second page

    Returns:
        (image, ground truth)
    """
    rng = np.random.default_rng(seed)
    height, width = size
    ink = _render_text(rng, height, width)

    page = rng.normal(SUPPORT_MEAN, NOISE_SIGMA, size)
    if bleed_through:
        reverse = np.fliplr(_render_text(rng, height, width)) & ~ink
        page[reverse] -= BLEED_DARKENING
    page[ink] = rng.normal(INK_MEAN, NOISE_SIGMA, int(ink.sum()))

    if gradient:
        page += np.linspace(-gradient, gradient, width)[np.newaxis, :]

    intensities = np.clip(np.rint(page), 0, 255).astype(np.uint8)
    return RasterImage(intensities), BinaryImage(ink)


def generate_corpus(out_dir: Path, n: int = 20, size: Tuple[int, int] = (128, 256), seed: int = 0,
                    gradient: float = 0.0, bleed_through: bool = False,
                    prefix: str = "doc") -> List[DatasetEntry]:
    """Write ``n`` pages to ``out_dir/images`` and their ground truth to ``out_dir/gt``.

    Ground-truth files carry the DIBCO ``_GT`` suffix.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    gt_dir = out_dir / "gt"
    images_dir.mkdir(parents=True, exist_ok=True)
    gt_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for index in range(n):
        entry_id = f"{prefix}_{index:03d}"
        image, gt = generate_document(seed + index, size, gradient, bleed_through)
        image_path = images_dir / f"{entry_id}.png"
        gt_path = gt_dir / f"{entry_id}_GT.png"
        save_raster(image, image_path)
        save_binary(gt, gt_path)
        entries.append(DatasetEntry(entry_id, image_path, gt_path))

    logger.info("corpus_generated", out_dir=str(out_dir), images=n, gradient=gradient,
                bleed_through=bleed_through)
    return entries

