"""Experiment configuration: dataclasses, YAML loading and seed derivation."""

from __future__ import annotations

import dataclasses
import hashlib
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .default_policy import CovarianceSchedule, PlannerParams, SplineParams
from .episode import NavigationParams
from .policy_search import RationalityParams, RewardParams
from .prediction import InpaintParams, PredictorKind
from .scenario import RandomBlocks, ScenarioSpec, UTrap, Walls
from .sensing import SensorModel


class ConfigError(ValueError):
    """The configuration cannot be parsed or is inconsistent."""


MOTIF_TYPES = {"random_blocks": RandomBlocks, "walls": Walls, "utrap": UTrap}
_MOTIF_NAMES = {v: k for k, v in MOTIF_TYPES.items()}


@dataclass(frozen=True)
class FileScenario:
    """A map stored as a grid file, with its start and goal."""

    id: str
    file: str
    start: tuple[float, float] = (1.5, 5.0)
    goal: tuple[float, float] = (8.5, 5.0)
    goal_radius: float = 0.3


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple = (ScenarioSpec(id="utrap", motifs=(UTrap(opening=16, depth=12),)),)
    predictors: tuple[str, ...] = ("ci", "cn", "cg")
    trials: int = 1
    maps_per_scenario: int | None = None
    reveal_fractions: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8)
    contiguous_reveal: bool = False
    seed: int = 0
    out: str = "out"
    jobs: int = 1
    timing: bool = False
    max_steps: int = 500
    epsilon: float | None = None
    sensor: SensorModel = field(default_factory=SensorModel)
    inpaint: InpaintParams = field(default_factory=InpaintParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    spline: SplineParams = field(default_factory=SplineParams)
    covariance: CovarianceSchedule = field(default_factory=CovarianceSchedule)
    rationality: RationalityParams = field(default_factory=RationalityParams)
    reward: RewardParams = field(default_factory=RewardParams)

    @property
    def n_maps(self) -> int:
        return self.trials if self.maps_per_scenario is None else self.maps_per_scenario

    def navigation(self) -> NavigationParams:
        return NavigationParams(sensor=self.sensor, inpaint=self.inpaint, planner=self.planner,
                                spline=self.spline, covariance=self.covariance, epsilon=self.epsilon,
                                rationality=self.rationality, reward=self.reward,
                                max_steps=self.max_steps)

    def validate(self) -> None:
        if self.trials < 1 or self.n_maps < 1:
            raise ConfigError("trials and maps_per_scenario must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        ids = [s.id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"scenario ids must be unique, got {ids}")
        for sid in ids:
            if not sid or "__" in sid or "/" in sid:
                raise ConfigError(f"scenario id {sid!r} must be non-empty without '__' or '/'")
        for p in self.predictors:
            try:
                PredictorKind.parse(p)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        for f in self.reveal_fractions:
            if not 0.0 <= f <= 1.0:
                raise ConfigError(f"reveal fraction {f} outside [0, 1]")
        for s in self.scenarios:
            if isinstance(s, ScenarioSpec):
                try:
                    s.validate()
                except (ValueError, TypeError) as e:
                    raise ConfigError(str(e)) from None


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    digest = hashlib.sha256("\x1f".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# ---------------------------------------------------------------- (de)serialization

def _build(tp, value, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {value!r}")
        return from_dict(tp, value, where)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _build(inner[0], value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_build(args[0], v, f"{where}[{i}]") for i, v in enumerate(value))
        if len(args) != len(value):
            raise ConfigError(f"{where}: expected {len(args)} items, got {len(value)}")
        return tuple(_build(a, v, f"{where}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, (str, int, float)) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return str(value)
    return value


def _motif(value, where: str):
    if not isinstance(value, dict) or "type" not in value:
        raise ConfigError(f"{where}: a motif needs a 'type' ({', '.join(MOTIF_TYPES)})")
    body = dict(value)
    kind = body.pop("type")
    if kind not in MOTIF_TYPES:
        raise ConfigError(f"{where}: unknown motif type {kind!r}")
    return from_dict(MOTIF_TYPES[kind], body, where)


def _scenario(value, where: str):
    if not isinstance(value, dict):
        raise ConfigError(f"{where}: expected a mapping")
    if "file" in value:
        return from_dict(FileScenario, value, where)
    body = dict(value)
    motifs = body.pop("motifs", [])
    if not isinstance(motifs, list):
        raise ConfigError(f"{where}.motifs: expected a list")
    spec = from_dict(ScenarioSpec, body, where)
    return dataclasses.replace(spec, motifs=tuple(_motif(m, f"{where}.motifs[{i}]") for i, m in enumerate(motifs)))


def from_dict(cls, data: dict, where: str = "config"):
    """Instantiate dataclass ``cls`` from a plain mapping; unknown keys are errors."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}; allowed: {sorted(names)}")
    kwargs = {}
    for name, value in data.items():
        path = f"{where}.{name}"
        if cls is ExperimentConfig and name == "scenarios":
            if not isinstance(value, list):
                raise ConfigError(f"{path}: expected a list")
            kwargs[name] = tuple(_scenario(v, f"{path}[{i}]") for i, v in enumerate(value))
        else:
            kwargs[name] = _build(hints[name], value, path)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def to_dict(obj):
    """Plain YAML-ready representation of a config dataclass tree."""
    if dataclasses.is_dataclass(obj):
        d = {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if type(obj) in _MOTIF_NAMES:
            d = {"type": _MOTIF_NAMES[type(obj)], **d}
        return d
    if isinstance(obj, (tuple, list)):
        return [to_dict(v) for v in obj]
    return obj


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a YAML file (missing keys take defaults) and apply ``overrides``."""
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        base = Path(path).resolve().parent
        for s in data.get("scenarios", []) or []:
            if isinstance(s, dict) and "file" in s and not Path(str(s["file"])).is_absolute():
                s["file"] = str(base / str(s["file"]))
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = from_dict(ExperimentConfig, data)
    cfg.validate()
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)
