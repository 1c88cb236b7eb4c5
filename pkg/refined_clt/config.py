"""Application configuration."""
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict

# Get the project root directory (parent of refined_clt/)
BASE_DIR = Path(__file__).resolve().parent.parent
ENV_FILE = BASE_DIR / ".env"


class Settings(BaseSettings):
    """Application settings.

    Every field can be overridden through a ``REFINED_CLT_``-prefixed environment
    variable or the project ``.env`` file. CLI flags and ``--config`` JSON files
    take precedence over these values.
    """

    model_config = SettingsConfigDict(
        env_file=str(ENV_FILE) if ENV_FILE.exists() else None,
        env_file_encoding="utf-8",
        env_prefix="REFINED_CLT_",
        extra="ignore",
    )

    # Application
    app_name: str = "Refined CLT"
    app_version: str = "0.1.0"
    log_level: str = "INFO"
    output_dir: str = "results"

    # Monte Carlo budgets
    default_seed: int = 7
    default_reps: int = 200_000
    max_n: int = 1_000_000
    replicate_budget: float = 1e10
    confidence: float = 0.99
    noise_factor: float = 3.0

    # Worker pool
    workers: int = 1
    block_size: int = 4096
    max_block_elements: int = 4_194_304

    # Numerics
    stable_truncation: int = 20_000
    moment_cache_points: int = 4096
    quad_rel_tol: float = 1e-10
    x0_h_bound: float = 0.5
    shifted_delta_cap: float = 10.0


settings = Settings()
