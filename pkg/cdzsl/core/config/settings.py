"""
Runtime Settings
----------------
This module defines the process-wide settings for cdzsl.

Features:
- Reads `CDZSL_*` environment variables and an optional `.env` file.
- Configures logging, worker threads and the non-convergence policy of the CLI.

Configuration Sections:
- Environment & Logging
- Execution
"""

from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Process settings, loaded from environment variables or `.env` file.

    Attributes:
        PROJECT_NAME (str): Name used by the logger and the CLI banner.
        ENVIRONMENT (Literal): Deployment environment (`local`, `staging`, `production`).
        LOG_LEVEL (Literal): Minimum level of the package logger.
        LOG_FILE (str | None): Rotating JSON log file; file logging is off when unset.
        N_JOBS (int): Worker threads for batch solvers and per-sample prediction.
        FATAL_NONCONVERGENCE (bool): Default for the CLI `--fatal-nonconvergence` flag.
    """

    model_config = SettingsConfigDict(
        env_prefix="CDZSL_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_ignore_empty=True,
        extra="ignore",
    )

    # Environment & Logging
    PROJECT_NAME: str = Field("cdzsl", description="Project name")
    ENVIRONMENT: Literal["local", "staging", "production"] = "local"
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "WARNING"
    LOG_FILE: str | None = Field(default=None, description="Rotating log file path")

    # Execution
    N_JOBS: int = Field(default=1, ge=1, description="Worker threads for batch work")
    FATAL_NONCONVERGENCE: bool = Field(
        default=False, description="Treat solver non-convergence as exit code 3"
    )

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v: object) -> object:
        """
        Accepts log levels in any case.

        Args:
            v (object): Raw value from the environment.

        Returns:
            object: Upper-cased level name when a string was given.
        """
        if isinstance(v, str):
            return v.strip().upper()
        return v


# Instantiate settings
settings = Settings()
