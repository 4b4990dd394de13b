import math
from pathlib import Path

from core.config import RunConfig, dump_config, load_config
from core.scenario import realizable_ratios


def describe(cfg: RunConfig) -> str:
    """short human summary appended to the normalized document"""
    ratios = ", ".join(f"{r.numerator}/{r.denominator}" for r in realizable_ratios(cfg.scenario.n_union))
    runs = len(cfg.scenario.seeds) * math.prod(len(ax.values) for ax in cfg.sweep.axes())
    return (
        f"# ablation: {cfg.ablation.name}\n"
        f"# realizable beta for n_union={cfg.scenario.n_union}: {ratios}\n"
        f"# runs: {runs}\n"
    )


def validate_config(path: str | Path) -> str:
    """parses and validates `path`; returns the normalized document (raises ConfigError otherwise)"""
    cfg = load_config(path)
    return dump_config(cfg) + describe(cfg)
