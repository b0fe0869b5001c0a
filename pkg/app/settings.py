"""
Process-level settings read from the environment.

A `.env` file in the working directory is loaded first (python-dotenv), so
local runs can keep DATABASE_URL / bucket names out of the shell profile.
Experiment parameters do NOT live here; they belong to `ExperimentConfig`.
"""

import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)


def _flag(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
OUTPUT_DIR: Optional[str] = os.getenv("TESTBED_OUTPUT_DIR") or None
CLOUD_LOGGING_ENABLED: bool = _flag("CLOUD_LOGGING_ENABLED")
SQLALCHEMY_ECHO: bool = _flag("SQLALCHEMY_ECHO")
ARTIFACTS_BUCKET_NAME: Optional[str] = os.getenv("ARTIFACTS_BUCKET_NAME") or None


def database_url(output_dir: str | Path) -> str:
    """DATABASE_URL if set, otherwise a SQLite registry next to the run artifacts."""
    url = os.getenv("DATABASE_URL")
    if url:
        return url
    path = Path(output_dir) / "runs.db"
    path.parent.mkdir(parents=True, exist_ok=True)
    return f"sqlite:///{path.resolve()}"
