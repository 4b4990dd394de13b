import os
from pathlib import Path

from dotenv import dotenv_values
from loguru import logger

from core.settings import settings


def get_output_root(cli_value: str | Path | None = None,
                    config_value: str | None = None,
                    from_dotenv: str | Path = '.env') -> Path:
    """
    Returns the directory runs are written under.
        Priority: `cli_value` > `DPA_OUTPUT_ROOT` env var > `DPA_OUTPUT_ROOT` in the .env file
        > `config_value` > `./runs`.
    """
    if cli_value:
        return Path(cli_value)
    if os.environ.get(settings.OUTPUT_ROOT_ENV):
        return Path(os.environ[settings.OUTPUT_ROOT_ENV])
    from_dotenv = Path(from_dotenv).resolve()
    if from_dotenv.exists():
        value = dotenv_values(from_dotenv).get(settings.OUTPUT_ROOT_ENV)
        if value:
            logger.debug(f"Using output root from .env file '{from_dotenv.as_posix()}'.")
            return Path(value)
    return Path(config_value or settings.DEFAULT_OUTPUT_ROOT)
