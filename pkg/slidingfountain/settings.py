"""
Environment driven defaults for the command line and logging setup
"""
import logging
import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, Field
from rich.console import Console
from rich.logging import RichHandler

# Load environment variables
load_dotenv()


class Settings(BaseModel):
    packets: int = Field(default=100_000, ge=1)
    seeds: int = Field(default=10, ge=1)
    threads: int = Field(default=1, ge=1)
    out_dir: str = "results"
    log_level: str = "WARNING"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read SWF_* variables (from the process environment or a .env file)"""
    values = {
        "packets": os.getenv("SWF_PACKETS"),
        "seeds": os.getenv("SWF_SEEDS"),
        "threads": os.getenv("SWF_THREADS"),
        "out_dir": os.getenv("SWF_OUT_DIR"),
        "log_level": os.getenv("SWF_LOG_LEVEL"),
    }
    return Settings(**{k: v for k, v in values.items() if v is not None})


def configure_logging(level: str | int = "WARNING") -> None:
    """Route library logs to stderr through rich; stdout stays clean for CSV"""
    logging.basicConfig(
        level=level.upper() if isinstance(level, str) else level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True, show_path=False)],
        force=True,
    )
