"""
Configuration settings for gpcmc.

This module loads configuration from environment variables with sensible defaults.
Every setting has a default, so the CLI and the HTTP service run without any
environment at all.
"""
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file if it exists
load_dotenv()


class Settings(BaseSettings):
    """Application settings"""
    model_config = SettingsConfigDict(
        env_prefix="GPCMC_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application
    APP_NAME: str = "gpcmc"
    APP_VERSION: str = "0.1.0"
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    LOG_FILE: Optional[str] = None

    # Estimator defaults
    DEFAULT_SAMPLES: int = 100_000
    DEFAULT_CHUNK_SIZE: int = 1_000_000
    DEFAULT_SEED: int = 0
    MAX_THREADS: int = os.cpu_count() or 1
    MEMORY_BUDGET_MB: int = 2048

    # Oracles
    QUAD_NODES: int = 4001
    QUAD_HALF_WIDTH: float = 10.0
    BRUTE_FORCE_SAMPLES: int = 10_000_000
    BRUTE_FORCE_MAX_DIM: int = 6

    @field_validator(
        "DEFAULT_SAMPLES",
        "DEFAULT_CHUNK_SIZE",
        "MAX_THREADS",
        "MEMORY_BUDGET_MB",
        "QUAD_NODES",
        "BRUTE_FORCE_SAMPLES",
        "BRUTE_FORCE_MAX_DIM",
    )
    @classmethod
    def must_be_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("LOG_LEVEL")
    @classmethod
    def normalize_level(cls, v: str) -> str:
        return v.upper()


# Create settings instance
settings = Settings()

# Export settings
__all__ = ["settings", "Settings"]
