"""Run configuration: a TOML document of dotted ``section.key = value`` pairs.

Every key has a default, unknown keys are rejected, and command-line
overrides (``{"curriculum.eta_percent": 25}``) win over file values.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from typing import Any, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .curriculum import CurriculumConfig
from .env import EnvConfig
from .ppo import PpoConfig
from .reward import RewardConfig

SEED_ENV_VAR = "ASKNAV_SEED"


class ConfigParseError(ValueError):
    """Malformed document or unknown key."""


class ConfigValueError(ValueError):
    """A key holds a value outside its domain."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class PolicyConfig:
    hidden: tuple[int, ...] = (128, 64)
    obs_stack: int = 1


@dataclass(frozen=True)
class TrainSection:
    method: str = "semi"
    eta_percent: float = 75.0
    total_iterations: int = 1000
    checkpoint_every: int = 50
    split_seed: int = 0


@dataclass(frozen=True)
class EvalSection:
    episodes: int = 500
    seed: int = 1000
    greedy: bool = False


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    curriculum: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    seed: int = 0
    output_dir: str = "runs/default"

    @property
    def curriculum_config(self) -> CurriculumConfig:
        return CurriculumConfig(self.curriculum.method, self.curriculum.eta_percent)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                out[f.name] = {k: (list(v) if isinstance(v, tuple) else v)
                               for k, v in dataclasses.asdict(value).items()}
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        return build_config(_flatten(data))


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig) if f.default_factory is not dataclasses.MISSING}
TOP_LEVEL = {"seed": int, "output_dir": str}


def _flatten(doc: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, path + "."))
        else:
            flat[path] = value
    return flat


def _coerce(key: str, value: Any, default: Any) -> Any:
    if value is None:
        return None
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ConfigValueError(key, f"expected a boolean, got {value!r}")
    try:
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = [v for v in value.replace("[", "").replace("]", "").split(",") if v.strip()]
            return tuple(int(v) for v in value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float) or default is None:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigValueError(key, f"cannot interpret {value!r} as {type(default).__name__}") from None


def build_config(flat: Mapping[str, Any]) -> RunConfig:
    sections: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    top: dict[str, Any] = {}
    for key, value in flat.items():
        if key in TOP_LEVEL:
            top[key] = _coerce(key, value, TOP_LEVEL[key]())
            continue
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigParseError(f"unknown key {key!r}")
        default = SECTIONS[section]()
        if name not in {f.name for f in fields(default)}:
            raise ConfigParseError(f"unknown key {key!r}")
        sections[section][name] = _coerce(key, value, getattr(default, name))

    built = {}
    for section, values in sections.items():
        try:
            built[section] = SECTIONS[section](**values)
        except ValueError as exc:
            raise ConfigValueError(section, str(exc)) from None
    cfg = RunConfig(**built, **top)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    c = cfg.curriculum
    if not 0.0 <= c.eta_percent <= 100.0:
        raise ConfigValueError("curriculum.eta_percent", f"must lie in [0, 100], got {c.eta_percent:g}")
    if c.method not in ("baseline", "feedback", "semi"):
        raise ConfigValueError("curriculum.method", f"must be baseline, feedback or semi, got {c.method!r}")
    if c.total_iterations < 0:
        raise ConfigValueError("curriculum.total_iterations", "must be >= 0")
    if c.checkpoint_every < 1:
        raise ConfigValueError("curriculum.checkpoint_every", "must be >= 1")
    e = cfg.env
    if not 0.0 <= e.obstacle_density < 1.0:
        raise ConfigValueError("env.obstacle_density", f"must lie in [0, 1), got {e.obstacle_density}")
    if not 0 < e.seen_classes < e.vocab_size:
        raise ConfigValueError("env.seen_classes", "need 0 < seen_classes < vocab_size")
    if e.grid_w < 3 or e.grid_h < 3:
        raise ConfigValueError("env.grid_w", "grid must be at least 3x3")
    if e.view_k < 1 or e.view_k % 2 == 0:
        raise ConfigValueError("env.view_k", "must be odd and positive")
    if e.max_steps < 1:
        raise ConfigValueError("env.max_steps", "must be >= 1")
    if e.feedback_persistence_steps < 1:
        raise ConfigValueError("env.feedback_persistence_steps", "must be >= 1")
    if e.success_radius_m < 0 or e.cell_size_m <= 0:
        raise ConfigValueError("env.success_radius_m", "radius must be >= 0 and cell size > 0")
    if cfg.policy.obs_stack < 1:
        raise ConfigValueError("policy.obs_stack", "must be >= 1")
    if cfg.eval.episodes < 1:
        raise ConfigValueError("eval.episodes", "must be >= 1")
    if cfg.ppo.minibatch_size < 1 or cfg.ppo.epochs_per_update < 1:
        raise ConfigValueError("ppo.minibatch_size", "minibatch_size and epochs_per_update must be >= 1")


def _load_doc(text: str) -> dict[str, Any]:
    try:
        return _flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"parse error: {exc}") from None


def parse_config(text: str = "", overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Parse a config document; ``overrides`` take precedence over its values."""
    flat = _load_doc(text)
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(flat)


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Read a config file. Without a seed in the file or overrides, the
    ``ASKNAV_SEED`` environment variable supplies one."""
    text = ""
    if path:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    flat = _load_doc(text)
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "seed" not in flat and os.environ.get(SEED_ENV_VAR):
        flat["seed"] = os.environ[SEED_ENV_VAR]
    return build_config(flat)


def dump_config(cfg: RunConfig) -> str:
    """Render as a dotted-key document that :func:`parse_config` reads back."""
    lines = []
    for section, values in cfg.to_dict().items():
        if isinstance(values, dict):
            for key, value in values.items():
                if value is None:
                    continue
                lines.append(f"{section}.{key} = {_toml_value(value)}")
        else:
            lines.append(f"{section} = {_toml_value(values)}")
    return "\n".join(lines) + "\n"


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'
