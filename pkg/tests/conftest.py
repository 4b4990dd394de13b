from pathlib import Path

import numpy as np
import pytest
import yaml

from core.config import RunConfig, TrainerConfig, parse_config
from core.scenario import make_scenario
from src.components.run.run import run_experiment


def tiny_trainer_doc(**overrides) -> dict:
    doc = {
        "iterations": 12,
        "decay_at": 8,
        "epoch_iters": 4,
        "images_per_domain": 4,
        "embed_dim": 4,
        "disc_hidden": 4,
        "log_every": 5,
        "monitor_images": 8,
        "holdout_images": 40,
    }
    doc.update(overrides)
    return doc


def tiny_run_document() -> dict:
    return {
        "scenario": {"beta": 0.5, "n_union": 4, "dim": 4, "seeds": [0]},
        "trainer": tiny_trainer_doc(),
        "output": {"run_name": "tiny"},
    }


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_scenario():
    return make_scenario(0.5, 4, dim=4, seed=0)


@pytest.fixture
def tiny_trainer_config() -> TrainerConfig:
    return TrainerConfig(**tiny_trainer_doc())


@pytest.fixture
def make_trainer_config():
    """tiny trainer config with field overrides"""
    return lambda **overrides: TrainerConfig(**tiny_trainer_doc(**overrides))


@pytest.fixture
def tiny_run_doc() -> dict:
    return tiny_run_document()


@pytest.fixture
def tiny_run_config(tiny_run_doc) -> RunConfig:
    return parse_config(tiny_run_doc)


@pytest.fixture(scope="session")
def finished_run(tmp_path_factory) -> Path:
    """directory of one completed tiny run, shared by read-only tests"""
    run_dir = tmp_path_factory.mktemp("finished") / "seed_0"
    run_experiment(parse_config(tiny_run_document()), 0, run_dir, progress=False)
    return run_dir


@pytest.fixture
def write_config(tmp_path):
    """writes a config document to a yaml file and returns its path"""

    def _write(doc: dict, name: str = "config.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(doc, sort_keys=False))
        return path

    return _write
