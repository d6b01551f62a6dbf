"""
Pydantic-based configuration management for Ordinal Embedding Tool.
"""

import json
from pathlib import Path
from typing import Any, Dict

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

_DEFAULT_CALIBRATION = str(Path(__file__).with_name("calibration.json"))


class AppSettings(BaseSettings):
    environment: str = Field("development")
    log_level: str = Field("INFO")
    workers: int = Field(1, ge=1)
    materialize_limit: int = Field(40, ge=2)
    rejection_max_items: int = Field(8, ge=2)
    rejection_batch: int = Field(4096, ge=1)
    default_margin: float = Field(1e-3, ge=0.0)
    threshold_c0: float = Field(10.0, gt=0.0)
    tie_jitter: float = Field(1e-12, gt=0.0)
    hausdorff_resolution: float = Field(0.02, gt=0.0)
    sampled_verification: int = Field(100_000, ge=1)
    calibration_path: str = Field(_DEFAULT_CALIBRATION)

    model_config = SettingsConfigDict(
        env_prefix="ORDEMB_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


settings = AppSettings()


def load_json_config(path: str) -> dict:
    """
    Load JSON config from the specified path, fallback to empty dict if not found.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        return {}
    except json.JSONDecodeError:
        return {}


CALIBRATION = load_json_config(settings.calibration_path)


def calibration_constant(name: str, key: Any = None, default: float = 1.0) -> float:
    """Constante congelada de calibración; `key` indexa tablas por tamaño."""
    value: Any = CALIBRATION.get(name, default)
    if isinstance(value, dict):
        value = value.get(str(key), default)
    return float(value)


def calibration_snapshot() -> Dict[str, Any]:
    return dict(CALIBRATION)


"""
Usage:
    from ordinal_embedding_tool.config.settings import settings, CALIBRATION

    # Access environment-based config
    print(settings.materialize_limit)

    # Access frozen lemma constants
    print(CALIBRATION["near_sim"])
"""
