"""The config module sets up the logger, the process settings and the run-config loader."""
import os
import sys
import logging
from pathlib import Path
from typing import Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError
from pydantic_settings import BaseSettings

from .models.errors import ConfigurationError
from .models.run import RunConfig

load_dotenv(".env")


class Settings(BaseSettings):
    """This class defines the process settings.

    Attributes:
        BELIEFKIT_LOG_LEVEL: The level of the package logger.
        BELIEFKIT_OUTPUT_DIR: Default output directory when `--out` is not given.
        BELIEFKIT_MAX_WORKERS: Thread pool size for parallel layers, models and pairs.
    """

    BELIEFKIT_LOG_LEVEL: str = os.getenv("BELIEFKIT_LOG_LEVEL", "INFO")
    BELIEFKIT_OUTPUT_DIR: str = os.getenv("BELIEFKIT_OUTPUT_DIR", "runs")
    BELIEFKIT_MAX_WORKERS: int = int(os.getenv("BELIEFKIT_MAX_WORKERS", "4"))


# Initialize this module's settings when the file is first defined
settings = Settings()

# Setup the logger to be used throughout the package
logger = logging.getLogger("beliefkit")
logger.setLevel(settings.BELIEFKIT_LOG_LEVEL.upper())
if not logger.handlers:
    logger.addHandler(logging.StreamHandler(sys.stdout))


def load_run_config(path: Optional[Union[str, Path]] = None, seed: Optional[int] = None) -> RunConfig:
    """Load and validate a YAML run config; defaults are materialised.

    Args:
        path: The YAML file; None gives the all-defaults config.
        seed: Overrides the config's global seed when given.

    Returns:
        RunConfig: The resolved config.
    """
    raw = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError("--config", f"{path} does not exist.")
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError("--config", f"{path} is not valid YAML ({exc}).") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError("--config", f"{path} must contain a mapping at the top level.")
    if seed is not None:
        raw["seed"] = seed
    try:
        config = RunConfig(**raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigurationError(location, first["msg"]) from exc
    logger.debug("Resolved run config: %s", config.model_dump())
    return config
