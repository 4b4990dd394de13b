"""Run documents: pydantic schemas loaded from / dumped to YAML."""

from pathlib import Path
from typing import Literal, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigError, ScenarioError
from core.scenario import ScenarioKind, shared_count
from core.settings import settings

ABLATIONS: dict[str, tuple[bool, bool, bool]] = {
    "full": (True, True, True),
    "no_gdpa": (False, True, True),
    "no_idsa": (True, False, True),
    "no_pcc": (True, True, False),
    "baseline": (False, False, False),
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioConfig(_Strict):
    beta: float = Field(0.5, gt=0.0, le=1.0)
    n_union: int = Field(8, ge=1)
    dim: int = Field(16, ge=1)
    shift: float = 0.75
    kind: ScenarioKind = "open"
    instances_per_image: int = Field(8, ge=1)
    spacing: float = Field(2.0, gt=0.0)
    global_noise: float = Field(0.05, ge=0.0)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)


class TrainerConfig(_Strict):
    iterations: int = Field(5000, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    lr_decayed: float = Field(1e-4, gt=0.0)
    decay_at: int = Field(2500, ge=0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(0.0, ge=0.0)
    radius_lr: float = Field(0.1, gt=0.0)
    disc_lr_mult: float = Field(10.0, gt=0.0)
    radius_init: float = 0.0
    gamma: float = Field(2.0, ge=0.0)
    delta: float = Field(0.1, gt=0.0)
    alpha: float = Field(0.1, ge=0.0)
    epoch_iters: int = Field(500, ge=1)
    grl_lambda: float = Field(1.0, ge=0.0)
    z_mode: Literal["mean", "fixed"] = "mean"
    z_fixed: float = Field(0.5, ge=0.0, le=1.0)
    literal_gdpa: bool = False
    literal_idsa: bool = False
    histogram_mode: Literal["per_domain", "joint"] = "per_domain"
    images_per_domain: int = Field(4, ge=1)
    embed_dim: int = Field(16, ge=1)
    disc_hidden: int = Field(16, ge=1)
    log_every: int = Field(50, ge=1)
    monitor_images: int = Field(32, ge=1)
    holdout_images: int = Field(1000, ge=4)


class AblationConfig(_Strict):
    gdpa: bool = True
    idsa: bool = True
    pcc: bool = True

    @classmethod
    def from_name(cls, name: str) -> "AblationConfig":
        if name not in ABLATIONS:
            raise ValueError(f"unknown ablation '{name}', expected one of {list(ABLATIONS)}")
        gdpa, idsa, pcc = ABLATIONS[name]
        return cls(gdpa=gdpa, idsa=idsa, pcc=pcc)

    @property
    def name(self) -> str:
        flags = (self.gdpa, self.idsa, self.pcc)
        return next((k for k, v in ABLATIONS.items() if v == flags), "custom")


class SweepAxis(_Strict):
    axis: Literal["beta", "ablation"]
    values: list[Union[float, str]] = Field(min_length=1)


class SweepConfig(_Strict):
    """one swept axis (`axis` + `values`) or a Cartesian `grid` of several"""

    axis: Literal["beta", "ablation"] | None = None
    values: list[Union[float, str]] = Field(default_factory=list)
    grid: list[SweepAxis] = Field(default_factory=list)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _one_form(self) -> "SweepConfig":
        if self.grid and (self.axis is not None or self.values):
            raise ValueError("sweep takes either axis/values or grid, not both")
        names = [a.axis for a in self.grid]
        if len(set(names)) != len(names):
            raise ValueError(f"sweep grid repeats an axis: {names}")
        return self

    def axes(self) -> list[SweepAxis]:
        if self.grid:
            return list(self.grid)
        if self.axis is None or not self.values:
            return []
        return [SweepAxis(axis=self.axis, values=self.values)]


class OutputConfig(_Strict):
    root: str | None = None
    run_name: str = "run"


class RunConfig(_Strict):
    schema_version: Literal[1] = settings.SCHEMA_VERSION
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    trainer: TrainerConfig = Field(default_factory=TrainerConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _check_realizable(self) -> "RunConfig":
        n = self.scenario.n_union
        betas = [self.scenario.beta]
        for ax in self.sweep.axes():
            if ax.axis == "beta":
                if any(isinstance(v, str) for v in ax.values):
                    raise ValueError("beta sweep values must be numbers")
                betas += ax.values
            else:
                unknown = [v for v in ax.values if v not in ABLATIONS]
                if unknown:
                    raise ValueError(f"unknown ablation values {unknown}, expected any of {list(ABLATIONS)}")
        for beta in betas:
            try:
                shared_count(float(beta), n)
            except ScenarioError as e:
                raise ValueError(str(e)) from e
        return self


def _problems(err: ValidationError) -> list[tuple[str, str]]:
    return [(".".join(str(p) for p in e["loc"]) or "<root>", e["msg"]) for e in err.errors()]


def parse_config(data: dict | None) -> RunConfig:
    try:
        return RunConfig.model_validate(data or {})
    except ValidationError as e:
        raise ConfigError("invalid run config", _problems(e)) from e


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: '{path}'")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"config '{path}' is not valid YAML: {e}") from e
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config '{path}' must be a mapping, got {type(data).__name__}")
    cfg = parse_config(data)
    logger.debug(f"loaded config '{path}'")
    return cfg


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
