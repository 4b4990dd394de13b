import hashlib
from pathlib import Path

import pandas as pd
import pytest
import yaml

from core.build_ import build_infofile, config_digest
from core.config import dump_config, parse_config
from core.errors import ConfigError, FigDataError, NumericError
from core.settings import settings
from core.utils import read_concat_all, read_table, write_atomic, write_table
from src.components.export_figdata.export_figdata import FIGURES, export_figdata
from src.components.run.run import CONFIG_FILE_NAME, run_all, run_experiment
from src.components.sweep import sweep as sweep_mod
from src.components.sweep.sweep import EVAL_FIELDS, TRACE_FIELDS, aggregate, plan, run_sweep
from src.components.validate_config.validate_config import validate_config


# utils
def test_read_table_reports_line_of_bad_value(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("iteration,gap_global,events\n0,0.1,none\n5,abc,none\n")
    with pytest.raises(FigDataError, match=r"line 3: column 'gap_global'"):
        read_table(path)


def test_read_table_reports_ragged_row(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("iteration,gap_global\n0,0.1\n5,0.2,7\n")
    with pytest.raises(FigDataError, match="line 3"):
        read_table(path)


def test_read_table_names_missing_columns(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("iteration,gap_global\n0,0.1\n")
    with pytest.raises(FigDataError, match="w_t"):
        read_table(path, required=["iteration", "w_s", "w_t"])


@pytest.mark.parametrize("name, content", [("metrics.csv", ""), ("metrics.txt", "a\n1\n")])
def test_read_table_rejects_empty_and_foreign_files(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content)
    with pytest.raises(FigDataError):
        read_table(path)
    with pytest.raises(FigDataError, match="not found"):
        read_table(tmp_path / "absent.csv")


def test_write_atomic_leaves_no_temp_files(tmp_path):
    target = tmp_path / "out" / "table.csv"
    write_table(pd.DataFrame({"a": [0.1, 1 / 3]}), target)
    write_atomic(target, "a\n1\n")
    assert target.read_text() == "a\n1\n"
    assert [p.name for p in target.parent.iterdir()] == ["table.csv"]


def test_read_concat_all_tags_runs(finished_run):
    frame = read_concat_all(finished_run.parent)
    assert set(frame["run"]) == {"seed_0"}
    with pytest.raises(FigDataError):
        read_concat_all(finished_run / "nowhere")


# run
def test_run_writes_outputs(finished_run):
    names = {p.name for p in finished_run.iterdir()}
    assert {settings.METRICS_FILE_NAME, settings.SUMMARY_FILE_NAME, CONFIG_FILE_NAME, settings.DEFAULT_INFOFILE_NAME} <= names

    header = (finished_run / settings.METRICS_FILE_NAME).read_text().splitlines()[0]
    assert header.split(",") == list(settings.METRICS_COLUMNS)

    summary = yaml.safe_load((finished_run / settings.SUMMARY_FILE_NAME).read_text())
    assert summary["seed"] == 0 and summary["ablation"] == "full"
    assert set(EVAL_FIELDS) <= set(summary)

    saved = parse_config(yaml.safe_load((finished_run / CONFIG_FILE_NAME).read_text()))
    assert saved.output.run_name == "tiny"


def test_repeated_run_is_byte_identical(finished_run, tiny_run_config, tmp_path):
    result = run_experiment(tiny_run_config, 0, tmp_path / "again", progress=False)
    again = (result.run_dir / settings.METRICS_FILE_NAME).read_bytes()
    assert again == (finished_run / settings.METRICS_FILE_NAME).read_bytes()


def test_run_all_uses_every_seed(tiny_run_doc, tmp_path):
    tiny_run_doc["scenario"]["seeds"] = [3, 4]
    tiny_run_doc["trainer"]["iterations"] = 2
    results = run_all(parse_config(tiny_run_doc), tmp_path, progress=False)
    assert [r.run_dir for r in results] == [tmp_path / "tiny" / "seed_3", tmp_path / "tiny" / "seed_4"]


# build_infofile
def test_build_infofile(tmp_path):
    path = build_infofile("run", "schema_version: 1\n", tmp_path, seed=7)
    info = yaml.safe_load(path.read_text())
    assert info["project"] == settings.PROJECT_NAME
    assert info["command"] == "run" and info["seed"] == 7
    assert info["config_digest"] == hashlib.sha256(b"schema_version: 1\n").hexdigest()[:16]
    assert info["config_digest"] == config_digest("schema_version: 1\n")
    assert set(info["git"]) == {"username", "commit", "remote_url"}


def test_build_infofile_needs_a_directory(tmp_path):
    with pytest.raises(ValueError):
        build_infofile("run", "", tmp_path / "missing")
    file = tmp_path / "file.txt"
    file.write_text("")
    with pytest.raises(ValueError):
        build_infofile("run", "", file)


# sweep
def _sweep_config(axis, values, seeds, iterations=12):
    doc = {
        "scenario": {"beta": 0.5, "n_union": 4, "dim": 4, "seeds": seeds},
        "trainer": {"iterations": iterations, "epoch_iters": 4, "embed_dim": 4, "disc_hidden": 4,
                    "monitor_images": 8, "holdout_images": 40, "log_every": 5},
        "sweep": {"axis": axis, "values": values},
        "output": {"run_name": "sweep"},
    }
    return parse_config(doc)


def test_beta_sweep_plan(tmp_path):
    jobs = plan(_sweep_config("beta", [0.25, 0.5, 0.75], [0, 1, 2, 3, 4]), tmp_path)
    assert len(jobs) == 15
    assert len({job.label for job in jobs}) == 3
    assert jobs[0].config.scenario.beta == 0.25
    assert jobs[0].run_dir == tmp_path / "sweep" / "beta=0.25" / "seed_0"


def test_ablation_sweep_plan(tmp_path):
    names = ["full", "no_gdpa", "no_idsa", "no_pcc", "baseline"]
    jobs = plan(_sweep_config("ablation", names, [0]), tmp_path)
    assert [job.config.ablation.name for job in jobs] == names


def _grid_config(grid, seeds, iterations=12):
    doc = _sweep_config(None, [], seeds, iterations).model_dump(mode="json")
    doc["sweep"] = {"axis": None, "values": [], "grid": [{"axis": a, "values": v} for a, v in grid]}
    return parse_config(doc)


def test_grid_plan_is_the_cartesian_product(tmp_path):
    names = ["full", "no_gdpa", "no_idsa", "no_pcc", "baseline"]
    cfg = _grid_config([("ablation", names), ("beta", [0.75, 0.5, 0.25])], [0, 1])
    jobs = plan(cfg, tmp_path)
    assert len(jobs) == 5 * 3 * 2

    points = list(dict.fromkeys(job.label for job in jobs))
    assert points == [f"ablation={n},beta={b}" for n in names for b in (0.75, 0.5, 0.25)]
    for job in jobs:
        (_, name), (_, beta) = job.point
        assert job.config.ablation.name == name
        assert job.config.scenario.beta == beta
        assert job.run_dir == tmp_path / "sweep" / f"ablation={name}" / f"beta={beta}" / f"seed_{job.seed}"
    assert cfg.scenario.beta == 0.5 and cfg.ablation.name == "full"


def test_grid_sweep_traces_come_from_each_run(tmp_path):
    cfg = _grid_config([("ablation", ["full", "baseline"]), ("beta", [0.5, 0.25])], [0], iterations=6)
    summary = run_sweep(cfg, tmp_path, workers=1, progress=False)
    assert summary["label"].tolist() == [
        "ablation=full,beta=0.5",
        "ablation=full,beta=0.25",
        "ablation=baseline,beta=0.5",
        "ablation=baseline,beta=0.25",
    ]
    runs = pd.read_csv(tmp_path / "sweep" / sweep_mod.RUNS_FILE_NAME)
    assert runs["value"].tolist() == ["full,0.5", "full,0.25", "baseline,0.5", "baseline,0.25"]
    for _, run in runs.iterrows():
        expected = sweep_mod.trace_means(read_table(Path(run["run_dir"]) / settings.METRICS_FILE_NAME))
        for field, value in expected.items():
            assert run[field] == pytest.approx(value, abs=1e-9)


def test_empty_axis_is_an_error(tmp_path):
    with pytest.raises(ConfigError):
        plan(_sweep_config("beta", [], [0]), tmp_path)
    with pytest.raises(ConfigError):
        plan(_sweep_config(None, [0.5], [0]), tmp_path)


def test_aggregate_rows_per_value():
    rows = []
    for label in ("beta=0.75", "beta=0.5", "beta=0.25"):
        for seed in range(5):
            rows.append({"label": label, "seed": seed, "status": "ok", **{f: float(seed) for f in EVAL_FIELDS + TRACE_FIELDS}})
    summary = aggregate(pd.DataFrame(rows))
    assert summary["label"].tolist() == ["beta=0.75", "beta=0.5", "beta=0.25"]
    assert (summary["n_ok"] == 5).all() and (summary["n_failed"] == 0).all()
    assert summary.loc[0, "shared_accuracy_mean"] == 2.0
    assert summary.loc[0, "shared_accuracy_std"] == pytest.approx(pd.Series(range(5)).std())


def test_sweep_summary_matches_per_run_files(tmp_path):
    summary = run_sweep(_sweep_config("beta", [0.5, 0.25], [0, 1]), tmp_path, workers=1, progress=False)
    out = tmp_path / "sweep"
    runs = read_table(out / sweep_mod.RUNS_FILE_NAME, text_columns=("label", "value", "status", "error", "run_dir"))
    assert len(runs) == 4 and (runs["status"] == "ok").all()
    assert len(summary) == 2

    for label, group in runs.groupby("label", sort=False):
        evals = [yaml.safe_load((Path(d) / settings.SUMMARY_FILE_NAME).read_text()) for d in group["run_dir"]]
        traces = [sweep_mod.trace_means(read_table(Path(d) / settings.METRICS_FILE_NAME)) for d in group["run_dir"]]
        row = summary[summary["label"] == label].iloc[0]
        assert row["shared_accuracy_mean"] == pytest.approx(pd.Series([e["shared_accuracy"] for e in evals]).mean(), abs=1e-9)
        assert row["mean_gap_global_mean"] == pytest.approx(pd.Series([t["mean_gap_global"] for t in traces]).mean(), abs=1e-9)
        assert row["mean_weight_diff_std"] == pytest.approx(pd.Series([t["mean_weight_diff"] for t in traces]).std(), abs=1e-9)


def test_sweep_continues_after_failed_run(tmp_path, monkeypatch):
    real = sweep_mod.run_experiment

    def flaky(cfg, seed, run_dir, **kwargs):
        if cfg.scenario.beta == 0.25:
            raise NumericError("diverged")
        return real(cfg, seed, run_dir, **kwargs)

    monkeypatch.setattr(sweep_mod, "run_experiment", flaky)
    summary = run_sweep(_sweep_config("beta", [0.25, 0.5], [0], iterations=3), tmp_path, workers=1, progress=False)
    assert summary["n_failed"].tolist() == [1, 0]
    assert summary["n_ok"].tolist() == [0, 1]
    runs = pd.read_csv(tmp_path / "sweep" / sweep_mod.RUNS_FILE_NAME)
    assert runs.loc[0, "error"] == "NumericError: diverged"


# export_figdata
def test_single_run_series_have_equal_length(finished_run, tmp_path):
    written = export_figdata([finished_run], tmp_path / "fig")
    assert set(written) == set(FIGURES)
    global_gap = pd.read_csv(written["global_gap.csv"])
    instance_gap = pd.read_csv(written["instance_gap.csv"])
    n_rows = len(pd.read_csv(finished_run / settings.METRICS_FILE_NAME))
    assert len(global_gap) == len(instance_gap) == n_rows
    assert global_gap["series"].unique().tolist() == ["beta=0.5|full"]
    assert list(pd.read_csv(written["global_weights.csv"]).columns) == ["series", "iteration", "w_s", "w_t", "weight_fig", "n_runs"]


def test_one_series_per_beta(finished_run, tiny_run_doc, tmp_path):
    metrics = (finished_run / settings.METRICS_FILE_NAME).read_text()
    for beta in (0.75, 0.25):
        run_dir = tmp_path / "runs" / f"beta={beta}"
        run_dir.mkdir(parents=True)
        (run_dir / settings.METRICS_FILE_NAME).write_text(metrics)
        tiny_run_doc["scenario"]["beta"] = beta
        (run_dir / CONFIG_FILE_NAME).write_text(dump_config(parse_config(tiny_run_doc)))
    written = export_figdata([tmp_path / "runs"], tmp_path / "fig")
    series = pd.read_csv(written["global_gap.csv"])["series"].unique().tolist()
    assert sorted(series) == ["beta=0.25|full", "beta=0.75|full"]


def test_export_rejects_missing_columns(tmp_path):
    path = tmp_path / settings.METRICS_FILE_NAME
    path.write_text("iteration,gap_global,gap_instance,w_s\n0,0.1,0.1,0.5\n")
    with pytest.raises(FigDataError, match="w_t"):
        export_figdata([path], tmp_path / "fig")


# validate_config
def test_validate_config_output(write_config, tiny_run_doc):
    text = validate_config(write_config(tiny_run_doc))
    assert parse_config(yaml.safe_load(text)) == parse_config(tiny_run_doc)
    assert "# ablation: full" in text
    assert "# realizable beta for n_union=4: 1/4, 1/2, 3/4, 1/1" in text
    assert "# runs: 1" in text
