"""Configuration settings for the adaptive frequency sweep."""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Sweep defaults
    dense_points: int = 601
    n_parts: int = 70
    part_error_threshold: float = 0.03
    max_iterations: int = 20

    # Batch oracle parallelism (SWEEP_THREADS)
    sweep_threads: int = 1

    # Files
    corpus_file: str = ""  # empty = config/oracle_corpus.json next to the package
    output_dir: str = "./sweep_output"
    run_ledger_db: str = "sweep_runs.db"

    # Logging
    log_level: str = "INFO"

    # Server Configuration
    host: str = "0.0.0.0"
    port: int = 8000
    debug: bool = False

    model_config = {
        "env_file": ".env",
        "case_sensitive": False,
        "extra": "ignore"  # Ignore extra fields from .env
    }


# Initialize settings
settings = Settings()
