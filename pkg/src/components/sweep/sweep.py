"""Runs one training per (grid point, seed) and aggregates the per-run outputs."""

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from loguru import logger
from tqdm import tqdm

from core.config import AblationConfig, RunConfig
from core.errors import ConfigError
from core.settings import settings
from core.utils import read_concat_all, write_table
from src.components.run.run import run_experiment

RUNS_FILE_NAME = "runs.csv"
SUMMARY_FILE_NAME = "summary.csv"
EVAL_FIELDS = (
    "shared_accuracy",
    "centroid_accuracy",
    "gap_global",
    "gap_instance",
    "probe_accuracy",
    "alignment_score",
)
TRACE_FIELDS = ("mean_gap_global", "mean_gap_instance", "mean_weight_diff")
TRACE_COLUMNS = ("gap_global", "gap_instance", "w_s", "w_t")


Point = tuple[tuple[str, float | str], ...]


@dataclass(frozen=True)
class SweepJob:
    point: Point  # (axis, value) per swept axis, in grid order
    seed: int
    config: RunConfig
    run_dir: Path

    @property
    def label(self) -> str:
        return ",".join(f"{axis}={value}" for axis, value in self.point)

    @property
    def value(self) -> str:
        return ",".join(str(value) for _, value in self.point)


def variant(cfg: RunConfig, axis: str, value: float | str) -> RunConfig:
    """`cfg` with the swept field set to `value`"""
    if axis == "beta":
        return cfg.model_copy(update={"scenario": cfg.scenario.model_copy(update={"beta": float(value)})})
    if axis == "ablation":
        return cfg.model_copy(update={"ablation": AblationConfig.from_name(str(value))})
    raise ConfigError(f"unknown sweep axis '{axis}'")


def plan(cfg: RunConfig, root: Path) -> list[SweepJob]:
    """one job per (grid point, seed); the grid is the Cartesian product of the swept axes"""
    axes = cfg.sweep.axes()
    if not axes:
        raise ConfigError("sweep needs an axis and at least one value", [("sweep", "empty axis")])
    base = Path(root) / cfg.output.run_name
    jobs = []
    for values in itertools.product(*(ax.values for ax in axes)):
        point = tuple((ax.axis, value) for ax, value in zip(axes, values))
        point_cfg = cfg
        for axis, value in point:
            point_cfg = variant(point_cfg, axis, value)
        run_dir = base.joinpath(*(f"{axis}={value}" for axis, value in point))
        jobs += [SweepJob(point, seed, point_cfg, run_dir / f"seed_{seed}") for seed in cfg.scenario.seeds]
    return jobs


def _execute(job: SweepJob, progress: bool = False) -> dict:
    status = {"label": job.label, "value": job.value, "seed": job.seed, "run_dir": job.run_dir.as_posix()}
    try:
        run_experiment(job.config, job.seed, job.run_dir, progress=progress, command="sweep")
    except Exception as e:  # one failed run must not stop the sweep
        logger.error(f"run {job.label} seed={job.seed} failed: {e}")
        return {**status, "status": "failed", "error": f"{type(e).__name__}: {e}"}
    return {**status, "status": "ok", "error": ""}


def trace_means(metrics: pd.DataFrame) -> dict[str, float]:
    """time-averaged alignment traces of one run"""
    return {
        "mean_gap_global": float(metrics["gap_global"].mean()),
        "mean_gap_instance": float(metrics["gap_instance"].mean()),
        "mean_weight_diff": float((metrics["w_s"] - metrics["w_t"]).abs().mean()),
    }


def collect_runs(statuses: list[dict], folder: Path) -> pd.DataFrame:
    """run table rebuilt from the files each run wrote under `folder`"""
    folder = Path(folder)
    traces = {}
    if any(st["status"] == "ok" for st in statuses):
        metrics = read_concat_all(folder, required=TRACE_COLUMNS)
        traces = {run: trace_means(group) for run, group in metrics.groupby("run", sort=False)}

    rows = []
    for st in statuses:
        row = dict(st)
        if st["status"] == "ok":
            run_dir = Path(st["run_dir"])
            evaluation = yaml.safe_load((run_dir / settings.SUMMARY_FILE_NAME).read_text())
            row.update({k: float(evaluation[k]) for k in EVAL_FIELDS})
            row.update(traces[run_dir.relative_to(folder).as_posix()])
        else:
            row.update({k: np.nan for k in EVAL_FIELDS + TRACE_FIELDS})
        rows.append(row)
    return pd.DataFrame(rows, columns=["label", "value", "seed", "status", "error", "run_dir", *EVAL_FIELDS, *TRACE_FIELDS])


def aggregate(runs: pd.DataFrame) -> pd.DataFrame:
    """mean / std per grid point over the successful seeds, in sweep order"""
    fields = list(EVAL_FIELDS + TRACE_FIELDS)
    order = list(dict.fromkeys(runs["label"]))
    ok = runs[runs["status"] == "ok"]
    grouped = ok.groupby("label", sort=False)[fields]
    mean = grouped.mean().add_suffix("_mean")
    std = grouped.std(ddof=1).fillna(0.0).add_suffix("_std")
    counts = runs.groupby("label", sort=False)["status"].agg(
        n_ok=lambda s: int((s == "ok").sum()), n_failed=lambda s: int((s != "ok").sum())
    )
    summary = counts.join(mean).join(std).reindex(order)
    interleaved = [c for f in fields for c in (f"{f}_mean", f"{f}_std")]
    return summary[["n_ok", "n_failed", *interleaved]].reset_index().rename(columns={"index": "label"})


def run_sweep(cfg: RunConfig, root: Path, workers: int | None = None, progress: bool = True) -> pd.DataFrame:
    """
    runs every (grid point, seed) job, then writes runs.csv and summary.csv under `root/<run_name>`.
    Returns the summary table.
    """
    jobs = plan(cfg, root)
    workers = workers or cfg.sweep.workers
    axes = " x ".join(ax.axis for ax in cfg.sweep.axes())
    logger.info(f"Sweep over {axes}: {len(jobs)} runs, {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            statuses = list(tqdm(pool.map(_execute, jobs), total=len(jobs), desc="sweep", disable=not progress))
    else:
        statuses = [_execute(job) for job in tqdm(jobs, desc="sweep", disable=not progress)]

    failed = sum(st["status"] != "ok" for st in statuses)
    if failed:
        logger.warning(f"{failed} of {len(jobs)} runs failed, see runs.csv")

    out = Path(root) / cfg.output.run_name
    runs = collect_runs(statuses, out)
    summary = aggregate(runs)
    write_table(runs, out / RUNS_FILE_NAME)
    write_table(summary, out / SUMMARY_FILE_NAME)
    logger.info(f"Sweep summary saved as '{out / SUMMARY_FILE_NAME}'")
    return summary
