"""
Application settings and configuration management.

This module handles environment-driven defaults (``Settings``) and the
optional key-value run configuration file accepted by every CLI subcommand
(``RunConfig``). Precedence is: command-line flags, then the config file,
then environment/defaults.
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from core.errors import ConfigError

load_dotenv()


def _env_list(name: str, default: str, cast=int) -> List:
    """Parse a comma-separated environment variable into a list."""
    raw = os.getenv(name, default).strip()
    if not raw:
        return []
    return [cast(part) for part in raw.split(",") if part.strip()]


class Settings:
    """Application settings and configuration."""

    def __init__(self):
        """Initialize settings from environment variables."""
        # Logging
        self.log_level: str = os.getenv("BINAQ_LOG_LEVEL", "INFO").upper()
        self.log_json: bool = os.getenv("BINAQ_LOG_JSON", "False").lower() == "true"

        # Worker pool cap for concurrent scoring
        self.threads: int = max(1, int(os.getenv("BINAQ_THREADS", str(os.cpu_count() or 1))))

        # Sauvola defaults
        self.sauvola_window: int = int(os.getenv("BINAQ_SAUVOLA_WINDOW", "25"))
        self.sauvola_k: float = float(os.getenv("BINAQ_SAUVOLA_K", "0.2"))
        self.sauvola_r: float = float(os.getenv("BINAQ_SAUVOLA_R", "128"))

        # Multi-window bank; empty weights mean uniform
        self.mws_windows: List[int] = _env_list("BINAQ_MWS_WINDOWS", "7,15,31,63")
        self.mws_weights: List[float] = _env_list("BINAQ_MWS_WEIGHTS", "", cast=float)

        # Threshold-map scorer margin
        self.hinge_alpha: float = float(os.getenv("BINAQ_HINGE_ALPHA", "16"))

        # Patch protocol; stride has no default and must be given explicitly
        self.patch_size: int = int(os.getenv("BINAQ_PATCH_SIZE", "256"))

        # Reference implementations refuse inputs beyond this size
        self.oracle_max_dimension: int = int(os.getenv("BINAQ_ORACLE_MAX_DIMENSION", "64"))


class RunConfig(BaseModel):
    """Values accepted in a ``--config`` key-value file.

    Every CLI flag has a key here (``--patch-size`` is ``patch_size``,
    ``report --in`` is ``input``). Every field is optional; unset fields fall
    back to ``settings`` or to the subcommand's own default.
    """

    model_config = ConfigDict(extra="forbid")

    # Binarizer
    method: Optional[str] = None
    window: Optional[int] = None
    k: Optional[float] = None
    r: Optional[float] = None
    windows: Optional[List[int]] = None
    weights: Optional[List[float]] = None
    patch_size: Optional[int] = None
    stride: Optional[int] = None
    alpha: Optional[float] = None

    # Inputs and outputs
    input: Optional[str] = None
    output: Optional[str] = None
    pred: Optional[str] = None
    gt: Optional[str] = None
    images: Optional[str] = None
    out: Optional[str] = None
    reports: Optional[List[str]] = None
    format: Optional[str] = None

    # Evaluation
    name: Optional[str] = None
    dataset: Optional[str] = None
    gt_polarity: Optional[str] = None
    pred_polarity: Optional[str] = None
    pred_threshold: Optional[str] = None
    threads: Optional[int] = None
    throughput: Optional[bool] = None
    augment: Optional[bool] = None

    # Logging
    log_level: Optional[str] = None
    log_json: Optional[bool] = None

    @field_validator("windows", "weights", "reports", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("format")
    @classmethod
    def _check_format(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in ("json", "csv", "markdown"):
            raise ValueError("format must be 'json', 'csv' or 'markdown'")
        return value

    @field_validator("log_level")
    @classmethod
    def _check_log_level(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ValueError("log_level must be DEBUG, INFO, WARNING or ERROR")
        return value.upper() if value is not None else None

    @field_validator("gt_polarity", "pred_polarity")
    @classmethod
    def _check_polarity(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in ("dark", "light"):
            raise ValueError("polarity must be 'dark' or 'light'")
        return value

    @field_validator("pred_threshold")
    @classmethod
    def _check_pred_threshold(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in ("fixed", "otsu"):
            raise ValueError("pred_threshold must be 'fixed' or 'otsu'")
        return value

    def merged_with(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Return a copy where every non-None override replaces the file value."""
        data = self.model_dump()
        data.update({key: value for key, value in overrides.items() if key in data and value is not None})
        return RunConfig.model_validate(data)


def load_run_config(path: Optional[str]) -> RunConfig:
    """Load a key-value run configuration file.

    Args:
        path: Path to a ``key=value`` file, or None for an empty configuration

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is missing or contains invalid values
    """
    if path is None:
        return RunConfig()

    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"Configuration file not found: {config_path}")

    raw = {key.strip().lower().replace("-", "_"): value for key, value in dotenv_values(config_path).items()}
    try:
        return RunConfig.model_validate({key: value for key, value in raw.items() if value not in (None, "")})
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration in {config_path}: {e}")


# Global settings instance
settings = Settings()
