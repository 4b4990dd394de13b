"""Directional reproduction runs: beta sweep and ablation sweep over five seeds (`pytest -m slow`)."""

import pytest

from core.config import parse_config
from src.components.sweep.sweep import run_sweep

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2, 3, 4]


def _sweep(root, axis, values):
    cfg = parse_config(
        {
            "scenario": {"beta": 0.5, "n_union": 8, "seeds": SEEDS},
            "trainer": {"iterations": 2000, "decay_at": 1000, "epoch_iters": 200, "log_every": 20},
            "sweep": {"axis": axis, "values": values, "workers": 4},
            "output": {"run_name": axis},
        }
    )
    summary = run_sweep(cfg, root, progress=False)
    assert (summary["n_failed"] == 0).all()
    return summary.set_index("label")


@pytest.fixture(scope="module")
def beta_summary(tmp_path_factory):
    return _sweep(tmp_path_factory.mktemp("beta"), "beta", [0.75, 0.5, 0.25])


@pytest.fixture(scope="module")
def ablation_summary(tmp_path_factory):
    return _sweep(tmp_path_factory.mktemp("ablation"), "ablation", ["full", "no_gdpa", "no_idsa", "no_pcc", "baseline"])


def test_global_gap_grows_with_private_classes(beta_summary):
    gaps = beta_summary.loc[["beta=0.75", "beta=0.5", "beta=0.25"], "mean_gap_global_mean"].tolist()
    assert gaps[0] < gaps[1] < gaps[2]


def test_instance_gap_stays_flat(beta_summary):
    global_gap = beta_summary["mean_gap_global_mean"]
    instance_gap = beta_summary["mean_gap_instance_mean"]
    assert instance_gap.max() - instance_gap.min() < 0.5 * (global_gap.max() - global_gap.min())


def test_weight_difference_grows_as_beta_drops(beta_summary):
    diffs = beta_summary.loc[["beta=0.75", "beta=0.5", "beta=0.25"], "mean_weight_diff_mean"].tolist()
    assert diffs[0] < diffs[1] < diffs[2]


def test_full_model_beats_ablations(ablation_summary):
    acc = ablation_summary["shared_accuracy_mean"]
    std = ablation_summary["shared_accuracy_std"]
    for name in ("no_gdpa", "no_idsa", "no_pcc", "baseline"):
        assert acc["ablation=full"] > acc[f"ablation={name}"]
    for name in ("no_gdpa", "no_idsa", "no_pcc"):
        assert acc[f"ablation={name}"] >= acc["ablation=baseline"]
    pooled = ((std["ablation=full"] ** 2 + std["ablation=baseline"] ** 2) / 2) ** 0.5
    assert acc["ablation=full"] - acc["ablation=baseline"] > pooled
