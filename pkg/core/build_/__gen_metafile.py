"""generates file with meta info about a run."""

import hashlib
import subprocess
from datetime import datetime
from pathlib import Path

import yaml

from core.settings import settings


def get_git_config() -> dict:
    """Returns dict of repo config."""
    try:
        username = subprocess.check_output(["git", "config", "user.name"], stderr=subprocess.DEVNULL).decode().strip()
        commit = subprocess.check_output(["git", "rev-parse", "HEAD"], stderr=subprocess.DEVNULL).decode().strip()
        remote_url = (
            subprocess.check_output(["git", "ls-remote", "--get-url", "origin"], stderr=subprocess.DEVNULL)
            .decode()
            .strip()
        )
    except Exception:
        username = "unknown"
        commit = "unknown"
        remote_url = "unknown"
    return {"username": username, "commit": commit, "remote_url": remote_url}


def config_digest(config_text: str) -> str:
    return hashlib.sha256(config_text.encode("utf-8")).hexdigest()[:16]


def get_infofile_content(command: str, config_text: str, **kwargs) -> str:
    """Generate yaml text with meta info about a run."""
    yaml_dict = {
        "project": settings.PROJECT_NAME,
        "command": command,
        "config_digest": config_digest(config_text),
        "git": get_git_config(),
        "timestamp": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
    }
    if kwargs:
        yaml_dict.update(kwargs)
    return yaml.dump(yaml_dict, indent=4, sort_keys=False)


def build_infofile(command: str, config_text: str, save_at: str | Path, **kwargs) -> Path:
    """Creates yaml file with meta info about a run.

    Parameters
    ----------
        - command: str - cli step that produced the outputs (run, sweep, ...)
        - config_text: str - normalized config document; only its digest is stored
        - save_at: Union[str, Path] - run directory to write the file into
        - kwargs: dict - additional arguments for include to the file.
    """
    save_at = Path(save_at)
    if not save_at.exists():
        msg = f"Directory not found: '{save_at}'"
        raise ValueError(msg)
    if save_at.is_file():
        msg = f"'save_at' must be a directory: '{save_at}'"
        raise ValueError(msg)

    save_as = save_at / settings.DEFAULT_INFOFILE_NAME
    save_as.write_text(get_infofile_content(command, config_text, **kwargs))
    return save_as
