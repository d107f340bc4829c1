"""
Configuration settings for Signal Lab.
"""

from typing import Tuple

from pydantic import field_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict


class Settings(BaseSettings):
    """Library and harness settings.

    Only explicit constructor arguments are honoured; runs must be
    reproducible from the scenario file and command-line flags alone.
    """

    # Application
    PROJECT_NAME: str = "Signal Lab"
    VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False
    WORKERS: int = 1

    # File formats
    SCENARIO_FORMAT_VERSION: int = 1
    SUMMARY_SCHEMA_VERSION: int = 1
    CSV_FLOAT_FORMAT: str = "%.6f"

    # Solver
    SOLVER_MAX_ITER: int = 100_000
    SOLVER_STALL_GAP: float = 1e-6
    SOLVER_GAP_TOL: float = 1e-13
    FEASIBILITY_TOL: float = 1e-9
    ACTIVE_PHASE_TOL: float = 1e-9
    ORACLE_MAX_POINTS: int = 100_000_000
    POLISH_MAX_ITER: int = 50
    POLISH_DROP_TOL: float = 1e-6
    POLISH_KKT_TOL: float = 1e-9
    POLISH_VALUE_TOL: float = 1e-12

    # Simulation
    TIME_EPS: float = 1e-9
    HARD_CAP_FACTOR: float = 10.0
    QUEUE_WINDOW_S: int = 300
    SENSOR_RANGE_M: float = 50.0

    model_config = SettingsConfigDict(case_sensitive=True, extra="forbid")

    @field_validator("LOG_LEVEL")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level

    @field_validator("WORKERS")
    @classmethod
    def positive_workers(cls, v: int) -> int:
        if v < 1:
            raise ValueError("WORKERS must be >= 1")
        return v

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)


# Global settings instance
settings = Settings()
