"""
Application Configuration
=========================
Centralized configuration for the PHKG pipeline.

This module is responsible for:
- Loading environment variables (and a local .env file)
- Reading key=value config files
- Exposing runtime configuration via a single settings object
"""

import dataclasses
import os
from dataclasses import dataclass
from typing import Mapping, Optional

from dotenv import dotenv_values, load_dotenv

# Load .env for local development
load_dotenv()

ENV_PREFIX = "PHKG_"


def get_setting(key: str, default: Optional[str] = None) -> str:
    """
    Resolve a setting from the environment.

    Priority order:
    1. PHKG_-prefixed environment variable
    2. Provided default
    """
    return os.getenv(f"{ENV_PREFIX}{key}", default or "")


def load_config_file(path: str) -> dict[str, str]:
    """
    Read a key=value config file.

    Keys are lower-cased so that both `window_length_days` and
    `WINDOW_LENGTH_DAYS` address the same setting. Empty values are dropped.
    """
    values = dotenv_values(path)
    return {
        key.strip().lower(): value.strip()
        for key, value in values.items()
        if value is not None and value.strip()
    }


@dataclass(frozen=True)
class Settings:
    """
    Runtime configuration container.

    All values are loaded once at startup and reused
    throughout the application.
    """

    # -------------------------
    # Knowledge graph namespaces
    # -------------------------
    USER_NAMESPACE: str = get_setting(
        "USER_NAMESPACE", "https://w3id.org/pho-example/user/"
    )
    USER_ID: str = get_setting("USER_ID", "user")

    # -------------------------
    # Summarization
    # -------------------------
    WINDOW_LENGTH_DAYS: int = int(get_setting("WINDOW_LENGTH_DAYS", "7"))
    LOW_CARB_MAX_G_PER_DAY: float = float(get_setting("LOW_CARB_MAX_G_PER_DAY", "130"))
    HIGH_CARB_ENERGY_FRACTION: float = float(
        get_setting("HIGH_CARB_ENERGY_FRACTION", "0.50")
    )
    LOW_FAT_ENERGY_FRACTION: float = float(get_setting("LOW_FAT_ENERGY_FRACTION", "0.25"))
    HIGH_FAT_ENERGY_FRACTION: float = float(
        get_setting("HIGH_FAT_ENERGY_FRACTION", "0.40")
    )
    CV_CONSISTENT_MAX: float = float(get_setting("CV_CONSISTENT_MAX", "0.25"))
    USUALLY_FRACTION: float = float(get_setting("USUALLY_FRACTION", "0.5"))

    # -------------------------
    # Competency questions
    # -------------------------
    PROGRESS_BAND: float = float(get_setting("PROGRESS_BAND", "0.05"))

    # -------------------------
    # Synthetic data
    # -------------------------
    SEED: int = int(get_setting("SEED", "7"))

    # -------------------------
    # Paths
    # -------------------------
    OUTPUT_DIR: str = get_setting("OUTPUT_DIR", "output")
    RULES_DIR: str = get_setting("RULES_DIR", "rules")
    CATALOG_PATH: str = get_setting("CATALOG_PATH", "data/recipes.json")

    # -------------------------
    # Logging
    # -------------------------
    LOG_LEVEL: str = get_setting("LOG_LEVEL", "WARNING")

    def validate(self) -> bool:
        """
        Validate configuration values before runtime.
        """
        if ":" not in self.USER_NAMESPACE:
            raise ValueError(
                f"USER_NAMESPACE must be an absolute IRI, got {self.USER_NAMESPACE!r}."
            )

        if not self.USER_ID:
            raise ValueError("USER_ID must not be empty.")

        if self.WINDOW_LENGTH_DAYS < 1:
            raise ValueError("WINDOW_LENGTH_DAYS must be at least 1.")

        if self.LOW_CARB_MAX_G_PER_DAY <= 0:
            raise ValueError("LOW_CARB_MAX_G_PER_DAY must be positive.")

        fractions = {
            "HIGH_CARB_ENERGY_FRACTION": self.HIGH_CARB_ENERGY_FRACTION,
            "LOW_FAT_ENERGY_FRACTION": self.LOW_FAT_ENERGY_FRACTION,
            "HIGH_FAT_ENERGY_FRACTION": self.HIGH_FAT_ENERGY_FRACTION,
            "USUALLY_FRACTION": self.USUALLY_FRACTION,
        }
        for name, value in fractions.items():
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}.")

        if self.HIGH_FAT_ENERGY_FRACTION <= self.LOW_FAT_ENERGY_FRACTION:
            raise ValueError(
                "HIGH_FAT_ENERGY_FRACTION must exceed LOW_FAT_ENERGY_FRACTION."
            )

        if self.CV_CONSISTENT_MAX <= 0:
            raise ValueError("CV_CONSISTENT_MAX must be positive.")

        if self.PROGRESS_BAND < 0:
            raise ValueError("PROGRESS_BAND must not be negative.")

        if self.LOG_LEVEL.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown LOG_LEVEL {self.LOG_LEVEL!r}.")

        return True

    def with_overrides(self, overrides: Mapping[str, object]) -> "Settings":
        """
        Return a validated copy with the given fields replaced.

        Keys are matched case-insensitively against field names; values
        are coerced to the field's type. Unknown keys raise ValueError.
        """
        fields = {field.name: field for field in dataclasses.fields(self)}
        changes: dict[str, object] = {}

        for key, value in overrides.items():
            name = key.upper()
            if name not in fields:
                raise ValueError(f"Unknown setting {key!r}.")
            if value is None:
                continue

            current = getattr(self, name)
            try:
                changes[name] = type(current)(value)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"Invalid value for {key}: {value!r}") from exc

        updated = dataclasses.replace(self, **changes)
        updated.validate()
        return updated


# Shared configuration instance
settings = Settings()
