from collections.abc import Iterable
from pathlib import Path

import pandas as pd
from loguru import logger

from core.config import load_config
from core.errors import FigDataError
from core.settings import settings
from core.utils import read_table, write_table
from src.components.run.run import CONFIG_FILE_NAME

FIGURES = {
    "global_gap.csv": ["gap_global"],
    "instance_gap.csv": ["gap_instance"],
    "global_weights.csv": ["w_s", "w_t", "weight_fig"],
}
REQUIRED_COLUMNS = ["iteration"] + [c for cols in FIGURES.values() for c in cols]


def find_metrics(inputs: Iterable[str | Path]) -> list[Path]:
    """metrics files given directly, or found recursively under given directories"""
    files = []
    for item in inputs:
        item = Path(item)
        if item.is_dir():
            found = sorted(item.rglob(settings.METRICS_FILE_NAME))
            if not found:
                raise FigDataError(f"No '{settings.METRICS_FILE_NAME}' files under '{item}'")
            files += found
        else:
            files.append(item)
    return files


def series_label(metrics_file: Path) -> str:
    """labels a run by its scenario ratio and ablation, from the config saved next to the metrics"""
    config_file = metrics_file.parent / CONFIG_FILE_NAME
    if not config_file.is_file():
        return metrics_file.parent.name
    cfg = load_config(config_file)
    return f"beta={cfg.scenario.beta:g}|{cfg.ablation.name}"


def collect(files: list[Path]) -> pd.DataFrame:
    dfs = []
    for f in files:
        df = read_table(f, required=REQUIRED_COLUMNS)
        dfs.append(df[REQUIRED_COLUMNS].assign(series=series_label(f), source=f.as_posix()))
    if not dfs:
        raise FigDataError("no metrics files given")
    return pd.concat(dfs, ignore_index=True)


def figure_tables(long: pd.DataFrame) -> dict[str, pd.DataFrame]:
    """per-figure long tables: one row per (series, iteration), values averaged over the runs of a series"""
    order = list(dict.fromkeys(long["series"]))
    tables = {}
    for name, cols in FIGURES.items():
        grouped = long.groupby(["series", "iteration"], sort=False)
        table = grouped[cols].mean()
        table["n_runs"] = grouped["source"].nunique()
        table = table.reset_index()
        table["series"] = pd.Categorical(table["series"], categories=order, ordered=True)
        tables[name] = table.sort_values(["series", "iteration"]).astype({"series": str}).reset_index(drop=True)
    return tables


def export_figdata(inputs: Iterable[str | Path], out_dir: str | Path) -> dict[str, Path]:
    files = find_metrics(inputs)
    long = collect(files)
    out_dir = Path(out_dir)
    written = {}
    for name, table in figure_tables(long).items():
        written[name] = write_table(table, out_dir / name)
    logger.info(f"Exported {len(written)} series files from {len(files)} runs to '{out_dir}'")
    return written
