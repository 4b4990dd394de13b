from dataclasses import dataclass
from pathlib import Path

import pandas as pd
import yaml
from loguru import logger

from core.build_ import build_infofile
from core.config import RunConfig, dump_config
from core.settings import settings
from core.trainer import DPATrainer, EvaluationRecord
from core.utils import write_atomic, write_table

CONFIG_FILE_NAME = "config.yaml"


@dataclass
class RunResult:
    run_dir: Path
    seed: int
    metrics: pd.DataFrame
    evaluation: EvaluationRecord


def run_dir_for(root: Path, cfg: RunConfig, seed: int) -> Path:
    return Path(root) / cfg.output.run_name / f"seed_{seed}"


def run_experiment(
    cfg: RunConfig,
    seed: int,
    run_dir: Path,
    progress: bool = True,
    command: str = "run",
) -> RunResult:
    """
    trains one (config, seed) pair and writes its outputs into `run_dir`:
        metrics.csv, evaluation.yaml, config.yaml (the normalized document) and run_info.yaml
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    trainer = DPATrainer.from_config(cfg, seed)
    metrics = trainer.fit(progress=progress)
    record = trainer.evaluate()

    write_table(metrics, run_dir / settings.METRICS_FILE_NAME)
    summary = {
        "seed": seed,
        "beta": cfg.scenario.beta,
        "ablation": cfg.ablation.name,
        "iterations": cfg.trainer.iterations,
        **record.model_dump(),
    }
    write_atomic(run_dir / settings.SUMMARY_FILE_NAME, yaml.safe_dump(summary, sort_keys=False))
    config_text = dump_config(cfg)
    write_atomic(run_dir / CONFIG_FILE_NAME, config_text)
    build_infofile(command, config_text, run_dir, seed=seed)

    logger.info(
        f"run done: '{run_dir}' shared_acc={record.shared_accuracy:.3f} alignment={record.alignment_score:.3f}"
    )
    return RunResult(run_dir, seed, metrics, record)


def run_all(cfg: RunConfig, root: Path, progress: bool = True) -> list[RunResult]:
    """one run per configured seed"""
    return [run_experiment(cfg, seed, run_dir_for(root, cfg, seed), progress) for seed in cfg.scenario.seeds]
