"""Flat ``key=value`` run configuration.

A run config is a model config plus the training knobs. ``preset`` picks
the starting point; any other key overrides it. The effective config
written next to every checkpoint lists every key, defaults included.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..fact import PRESETS, ConfigError, FactConfig
from ..numerics.optim import PAPER_SCHEDULE
from .windows import DEFAULT_STRIDE

# Rates for a few thousand desk-scale updates; PAPER_SCHEDULE is
# tuned for 300k updates and barely moves a small model in 4k.
DESK_SCHEDULE: tuple[tuple[int, float], ...] = ((0, 1e-3), (2_000, 3e-4))


@dataclass(frozen=True)
class TrainSettings:
    steps: int = 4000
    batch_size: int = 16
    seed: int = 0
    stride: int = DEFAULT_STRIDE
    lr_schedule: tuple[tuple[int, float], ...] = DESK_SCHEDULE
    normalize: bool = True
    log_every: int = 100

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")
        sched = self.lr_schedule
        if not sched or sched[0][0] != 0:
            raise ConfigError("lr_schedule must start at step 0")
        for (t0, r0), (t1, r1) in zip(sched, sched[1:]):
            if t1 <= t0 or r1 >= r0:
                raise ConfigError("lr_schedule needs increasing steps and decreasing rates")
        if any(r <= 0 for _, r in sched):
            raise ConfigError("learning rates must be positive")


@dataclass(frozen=True)
class RunConfig:
    model: FactConfig
    train: TrainSettings
    preset: str = "desk"


def format_schedule(sched) -> str:
    return ",".join(f"{t}:{r!r}" for t, r in sched)


def parse_schedule(text: str) -> tuple[tuple[int, float], ...]:
    if text.strip() == "paper":
        return PAPER_SCHEDULE
    try:
        out = []
        for part in text.split(","):
            t, r = part.split(":")
            out.append((int(t), float(r)))
        return tuple(out)
    except ValueError:
        raise ConfigError(f"lr_schedule must look like '0:1e-3,2000:3e-4', got {text!r}") from None


def _coerce(name: str, default, value: str):
    try:
        if isinstance(default, bool):
            low = value.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError
            return low in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r} as {type(default).__name__}") from None
    return value.strip()


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_run_config(values: dict[str, str]) -> RunConfig:
    values = dict(values)
    preset = values.pop("preset", "desk")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    model_fields = {f.name: f.default for f in fields(FactConfig)}
    train_fields = {f.name: f.default for f in fields(TrainSettings)}
    model_kw, train_kw = {}, {}
    for k, v in values.items():
        if k in model_fields:
            model_kw[k] = _coerce(k, model_fields[k], v)
        elif k == "lr_schedule":
            train_kw[k] = parse_schedule(v)
        elif k in train_fields:
            train_kw[k] = _coerce(k, train_fields[k], v)
        else:
            raise ConfigError(f"unknown config key {k!r}")
    model = replace(PRESETS[preset](), **model_kw)
    return RunConfig(model, TrainSettings(**train_kw), preset)


def load_run_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            values = parse_config_text(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
    values.update(overrides or {})
    return build_run_config(values)


def effective_config_text(run: RunConfig) -> str:
    lines = [f"preset={run.preset}"]
    for k, v in run.model.to_dict().items():
        lines.append(f"{k}={v}")
    for f in fields(TrainSettings):
        v = getattr(run.train, f.name)
        lines.append(f"{f.name}={format_schedule(v) if f.name == 'lr_schedule' else v}")
    return "\n".join(lines) + "\n"
