"""Experiment configuration (JSON, one experiment per file)."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .compression import CompressionPolicy, PolicyKind
from .errors import ConfigError, GmfError
from .model import ModelKind, ModelSpec


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "synthetic"
    n_classes: int = 10
    n_features: int = 32
    n_samples: int = 2500
    class_separation: float = 3.0
    n_informative: int | None = None
    spectrum_decay: float = 0.0
    path: str | None = None
    test_fraction: float = 0.1


@dataclass(frozen=True)
class TaskConfig:
    model: str = "mlp1"
    hidden_units: int = 64
    dataset: DatasetConfig = field(default_factory=DatasetConfig)

    def model_spec(self, n_features: int, n_classes: int) -> ModelSpec:
        hidden = self.hidden_units if self.model == ModelKind.MLP1.value else 0
        return ModelSpec(ModelKind(self.model), n_features, n_classes, hidden)


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "dgcwgmf"
    rate: float = 0.1
    alpha: float = 0.9
    beta: float = 0.9

    def build(self, tau: float = 0.0) -> CompressionPolicy:
        return CompressionPolicy(PolicyKind.parse(self.kind), self.rate, self.alpha, self.beta, tau)


@dataclass(frozen=True)
class TauSchedule:
    start: float = 0.0
    end: float = 0.6
    n_steps: int = 10


@dataclass(frozen=True)
class EtaDecay:
    factor: float = 0.1
    every: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskConfig = field(default_factory=TaskConfig)
    n_clients: int = 20
    n_rounds: int = 220
    batch_size: int = 32
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    tau_schedule: TauSchedule = field(default_factory=TauSchedule)
    eta: float = 0.1
    eta_decay: EtaDecay | None = None
    target_emd: float = 0.0
    seed: int = 0
    output_path: str | None = None
    multicast_download: bool = False

    def __post_init__(self):
        validate(self)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **changes) -> ExperimentConfig:
        d = self.to_dict()
        for key, value in changes.items():
            set_path(d, key, value)
        return from_dict(d)

    def with_policy(self, **changes) -> ExperimentConfig:
        return self.with_overrides(**{f"policy.{k}": v for k, v in changes.items()})


def validate(cfg: ExperimentConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.n_rounds >= 1, "n_rounds must be >= 1")
    need(cfg.n_clients >= 1, "n_clients must be >= 1")
    need(cfg.batch_size >= 1, "batch_size must be >= 1")
    need(cfg.eta > 0, "eta must be positive")
    need(cfg.target_emd >= 0, "target_emd must be >= 0")
    ts = cfg.tau_schedule
    need(ts.n_steps >= 1, "tau_schedule.n_steps must be >= 1")
    need(0.0 <= ts.start <= ts.end <= 1.0, "tau_schedule needs 0 <= start <= end <= 1")
    if cfg.eta_decay is not None:
        need(cfg.eta_decay.every >= 1 and cfg.eta_decay.factor > 0, "eta_decay needs every >= 1, factor > 0")
    need(cfg.task.model in {k.value for k in ModelKind}, f"unknown model {cfg.task.model!r}")
    ds = cfg.task.dataset
    need(ds.source in ("synthetic", "csv"), f"unknown dataset source {ds.source!r}")
    if ds.source == "csv":
        need(bool(ds.path), "csv dataset needs a path")
    need(0.0 < ds.test_fraction < 1.0, "test_fraction must be in (0, 1)")
    try:
        cfg.policy.build(ts.start)
    except GmfError as exc:
        raise ConfigError(f"policy: {exc}") from None


_NESTED = {
    "task": TaskConfig,
    "policy": PolicyConfig,
    "tau_schedule": TauSchedule,
    "eta_decay": EtaDecay,
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = cls.__dataclass_fields__
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def from_dict(data: dict) -> ExperimentConfig:
    data = copy.deepcopy(data)
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "task" in data:
        task = data["task"]
        if isinstance(task, dict) and "dataset" in task:
            task["dataset"] = _build(DatasetConfig, task["dataset"], "task.dataset")
    for key, cls in _NESTED.items():
        if data.get(key) is not None:
            data[key] = _build(cls, data[key], key)
    return _build(ExperimentConfig, data, "config")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return from_dict(data)


def set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        if cur.get(k) is None:
            cur[k] = {}
        cur = cur[k]
        if not isinstance(cur, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not an object")
    cur[keys[-1]] = value
