"""
Utility functions for the binarization evaluation toolkit.

This module contains helpers shared across the harness and report code:
rounding for rendered tables, canonical JSON, config hashing and stem
normalization for dataset matching.
"""

import hashlib
import json
import math
import re
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Dict

GT_SUFFIX_PATTERN = re.compile(r"_gt$", re.IGNORECASE)


def format_fixed(value: float, places: int = 2) -> str:
    """Format rounding half away from zero after removing binary floating-point noise.

    Args:
        value: Value to format; numpy scalars are accepted
        places: Decimal places to keep

    Returns:
        Fixed-point text (e.g. 2.625 -> "2.63", 85.245000000001 -> "85.25")
    """
    if math.isnan(value):
        return "n/a"
    if math.isinf(value):
        return "∞" if value > 0 else "-∞"
    return f"{_quantize(value, places):.{places}f}"


def _quantize(value: float, places: int) -> Decimal:
    cleaned = Decimal(repr(round(float(value), 10)))
    return cleaned.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def canonical_json(data: Any) -> str:
    """Deterministic JSON text: sorted keys, fixed indentation."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)


def config_hash(config: Dict[str, Any]) -> str:
    """Stable short hash of a configuration dictionary."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def normalize_stem(path: Path) -> str:
    """File stem with any trailing ``_GT``/``_gt`` removed."""
    return GT_SUFFIX_PATTERN.sub("", Path(path).stem)


def save_text(content: bytes, output_path: str) -> None:
    """Write report bytes to a file.

    Args:
        content: Bytes to write
        output_path: Path to save the file
    """
    try:
        with open(output_path, "wb") as f:
            f.write(content)
    except OSError as e:
        raise OSError(f"Failed to save results to {output_path}: {str(e)}")
