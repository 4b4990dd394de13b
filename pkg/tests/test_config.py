import pytest
import yaml

from core.config import (
    ABLATIONS,
    AblationConfig,
    RunConfig,
    dump_config,
    load_config,
    parse_config,
)
from core.ds_constants import get_output_root
from core.errors import ConfigError
from core.settings import settings


def test_every_field_has_a_default():
    cfg = parse_config({})
    assert cfg == RunConfig()
    assert cfg.trainer.lr == 1e-3 and cfg.trainer.lr_decayed == 1e-4
    assert cfg.trainer.radius_lr == 0.1 and cfg.trainer.alpha == 0.1
    assert cfg.scenario.dim == 16 and cfg.scenario.instances_per_image == 8
    assert cfg.ablation.name == "full"


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config({"trainer": {"learning_rate": 0.1}})
    assert ("trainer.learning_rate", "Extra inputs are not permitted") in err.value.problems


def test_field_level_diagnostics():
    with pytest.raises(ConfigError) as err:
        parse_config({"scenario": {"beta": 1.5}, "trainer": {"iterations": 0}})
    locations = [loc for loc, _ in err.value.problems]
    assert "scenario.beta" in locations and "trainer.iterations" in locations
    assert "scenario.beta" in str(err.value)


def test_unrealizable_beta_names_nearest_ratios():
    with pytest.raises(ConfigError) as err:
        parse_config({"scenario": {"beta": 0.3, "n_union": 7}})
    ((loc, msg),) = err.value.problems
    assert loc == "<root>"
    assert "2/7" in msg and "3/7" in msg


def test_sweep_values_are_checked():
    with pytest.raises(ConfigError):
        parse_config({"scenario": {"n_union": 4}, "sweep": {"axis": "beta", "values": [0.5, 0.3]}})
    with pytest.raises(ConfigError):
        parse_config({"sweep": {"axis": "beta", "values": ["full"]}})
    with pytest.raises(ConfigError):
        parse_config({"sweep": {"axis": "ablation", "values": ["full", "no_everything"]}})
    cfg = parse_config({"sweep": {"axis": "ablation", "values": list(ABLATIONS)}})
    assert cfg.sweep.values == list(ABLATIONS)


def test_sweep_grid_is_checked():
    grid = [{"axis": "ablation", "values": ["full", "baseline"]}, {"axis": "beta", "values": [0.75, 0.25]}]
    cfg = parse_config({"sweep": {"grid": grid}})
    assert [ax.axis for ax in cfg.sweep.axes()] == ["ablation", "beta"]
    with pytest.raises(ConfigError):
        parse_config({"sweep": {"axis": "beta", "values": [0.5], "grid": grid}})
    with pytest.raises(ConfigError):
        parse_config({"sweep": {"grid": [grid[1], {"axis": "beta", "values": [0.5]}]}})
    with pytest.raises(ConfigError):
        parse_config({"scenario": {"n_union": 4}, "sweep": {"grid": [grid[0], {"axis": "beta", "values": [0.3]}]}})
    with pytest.raises(ConfigError):
        parse_config({"sweep": {"grid": [{"axis": "ablation", "values": ["no_everything"]}]}})
    assert parse_config({"sweep": {"axis": "beta", "values": [0.25]}}).sweep.axes()[0].values == [0.25]
    assert parse_config({}).sweep.axes() == []


@pytest.mark.parametrize("name", list(ABLATIONS))
def test_ablation_names(name):
    assert AblationConfig.from_name(name).name == name


def test_custom_and_unknown_ablation():
    assert AblationConfig(gdpa=False, idsa=True, pcc=False).name == "custom"
    with pytest.raises(ValueError):
        AblationConfig.from_name("no_everything")


def test_round_trip(tiny_run_doc):
    tiny_run_doc["sweep"] = {"axis": "beta", "values": [0.25, 0.5, 0.75], "workers": 2}
    tiny_run_doc["ablation"] = {"pcc": False}
    cfg = parse_config(tiny_run_doc)
    text = dump_config(cfg)
    again = parse_config(yaml.safe_load(text))
    assert again == cfg
    assert dump_config(again) == text


def test_load_config(write_config, tiny_run_doc):
    cfg = load_config(write_config(tiny_run_doc))
    assert cfg.output.run_name == "tiny"
    assert cfg.trainer.iterations == 12


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config(path) == RunConfig()


@pytest.mark.parametrize("text", ["scenario: [unclosed", "- just\n- a list\n"])
def test_load_config_rejects_bad_documents(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yaml")


def test_shipped_configs_are_valid():
    paths = sorted((settings.BASE_DIR / "configs").glob("*.yaml"))
    assert paths
    for path in paths:
        load_config(path)


# output root
def test_output_root_priority(tmp_path, monkeypatch):
    env_file = tmp_path / ".env"
    env_file.write_text(f"{settings.OUTPUT_ROOT_ENV}=from_dotenv\n")
    monkeypatch.delenv(settings.OUTPUT_ROOT_ENV, raising=False)

    assert get_output_root("cli", "cfg", env_file).as_posix() == "cli"
    assert get_output_root(None, "cfg", env_file).as_posix() == "from_dotenv"
    assert get_output_root(None, "cfg", tmp_path / "missing.env").as_posix() == "cfg"
    assert get_output_root(None, None, tmp_path / "missing.env").as_posix() == settings.DEFAULT_OUTPUT_ROOT

    monkeypatch.setenv(settings.OUTPUT_ROOT_ENV, "from_env")
    assert get_output_root(None, "cfg", env_file).as_posix() == "from_env"
    assert get_output_root("cli", "cfg", env_file).as_posix() == "cli"
