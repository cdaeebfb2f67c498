"""
Exception hierarchy for the binarization toolkit.

Every error carries the process exit code the command-line surface reports
for it: 1 for usage/config problems, 2 for data problems (matching, shapes,
unreadable files), 3 for runs where no metric could be computed at all.
"""

from typing import Iterable, List, Optional


class BinaqError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 2


class ConfigError(BinaqError):
    """Invalid parameters, flags or configuration file values."""

    exit_code = 1


class UnsupportedOperationError(BinaqError):
    """Operation requested on a source that cannot support it."""

    exit_code = 1


class ShapeError(BinaqError):
    """Two images (or an image and a map) disagree in dimensions."""


class ImageIOError(BinaqError):
    """An image file could not be read or written."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"Image I/O failed for {self.path}: {reason}")


class FormatError(BinaqError):
    """An image file uses a format or bit depth the toolkit does not accept."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"Unsupported image format in {self.path}: {reason}")


class DatasetMatchError(BinaqError):
    """Images and ground-truth files could not be paired one-to-one."""

    def __init__(self, orphan_images: Iterable[str], orphan_gts: Iterable[str]):
        self.orphan_images: List[str] = sorted(orphan_images)
        self.orphan_gts: List[str] = sorted(orphan_gts)
        parts = []
        if self.orphan_images:
            parts.append(f"images without ground truth: {', '.join(self.orphan_images)}")
        if self.orphan_gts:
            parts.append(f"ground truth without image: {', '.join(self.orphan_gts)}")
        super().__init__("Dataset matching failed; " + "; ".join(parts))


class EvaluationError(BinaqError):
    """A method could not be evaluated on a dataset (e.g. missing predictions)."""


class AggregationError(BinaqError):
    """A (method, dataset, metric) cell needed for aggregation is missing."""

    def __init__(self, method: str, dataset: str, metric: str, reason: Optional[str] = None):
        self.method = method
        self.dataset = dataset
        self.metric = metric
        message = f"Missing aggregation cell: method={method} dataset={dataset} metric={metric}"
        if reason:
            message += f" ({reason})"
        super().__init__(message)


class DegenerateInputError(BinaqError):
    """Input has no foreground (or no background) where a metric needs it."""


class UndefinedMetricError(BinaqError):
    """A metric is mathematically undefined for the given input (e.g. NUBN == 0)."""

    exit_code = 3


class OracleBoundsError(BinaqError):
    """Reference implementation called on an input larger than it accepts."""
