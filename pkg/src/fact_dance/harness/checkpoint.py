"""Checkpoint directories: a ``manifest.txt`` plus one FTNS file per tensor.

The manifest is ``key=value`` text holding the model config, the step
count, the Adam scalars and the list of tensor files. Nothing time- or
host-dependent is written, so equal runs give byte-equal checkpoints.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..fact import ConfigError, FactConfig, FactParams, FeatureNorm, parameter_shapes
from ..numerics import AdamState, FormatError, Tensor, read_tensor, write_tensor
from .config import format_schedule, parse_config_text, parse_schedule
from .windows import DataError

MANIFEST = "manifest.txt"
FORMAT_TAG = "fact-checkpoint-1"


class CheckpointError(DataError):
    pass


def _file_name(kind: str, name: str) -> str:
    return f"{kind}/{name}.ftns"


def save_checkpoint(path, params: FactParams, state: AdamState | None = None, norm: FeatureNorm | None = None) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    lines = [f"format={FORMAT_TAG}", f"step={state.step if state else 0}"]
    lines += [f"config.{k}={v}" for k, v in params.config.to_dict().items()]
    files: list[tuple[str, np.ndarray]] = []
    for name in sorted(params.tensors):
        files.append((_file_name("params", name), params.tensors[name].data))
    if norm is not None:
        for name, arr in sorted(norm.tensors().items()):
            files.append((_file_name("norm", name), arr))
    if state is not None:
        lines += [
            f"adam.beta1={state.beta1!r}",
            f"adam.beta2={state.beta2!r}",
            f"adam.epsilon={state.epsilon!r}",
            f"adam.schedule={format_schedule(state.schedule)}",
        ]
        for name in sorted(state.m):
            files.append((_file_name("adam_m", name), state.m[name]))
            files.append((_file_name("adam_v", name), state.v[name]))
    for rel, arr in files:
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        write_tensor(target, arr)
        lines.append(f"tensor={rel}")
    (root / MANIFEST).write_text("\n".join(lines) + "\n")
    return root


def _resolve(path) -> Path:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST
    if not p.is_file():
        raise CheckpointError(f"no checkpoint manifest at {p}")
    return p


def load_checkpoint(path):
    """Return ``(params, state, norm)``; ``state`` and ``norm`` may be None."""
    manifest = _resolve(path)
    root = manifest.parent
    try:
        text = manifest.read_text()
    except UnicodeDecodeError:
        raise CheckpointError(f"{manifest} is not a text manifest") from None
    entries = []
    scalars: dict[str, str] = {}
    for line in text.splitlines():
        if line.startswith("tensor="):
            entries.append(line.split("=", 1)[1])
    try:
        scalars = parse_config_text("\n".join(l for l in text.splitlines() if not l.startswith("tensor=")))
    except ConfigError as e:
        raise CheckpointError(f"{manifest}: {e}") from None
    if scalars.get("format") != FORMAT_TAG:
        raise CheckpointError(f"{manifest}: not a {FORMAT_TAG} manifest")
    cfg = FactConfig.from_dict({k[7:]: v for k, v in scalars.items() if k.startswith("config.")})
    dtype = np.dtype(cfg.dtype)
    tensors: dict[str, dict[str, np.ndarray]] = {}
    for rel in entries:
        kind, fname = rel.split("/", 1)
        try:
            arr = read_tensor(root / rel)
        except FileNotFoundError:
            raise CheckpointError(f"checkpoint tensor {rel} is missing") from None
        except FormatError as e:
            raise CheckpointError(f"{rel}: {e}") from None
        tensors.setdefault(kind, {})[fname[: -len(".ftns")]] = arr
    shapes = parameter_shapes(cfg)
    got = tensors.get("params", {})
    if set(got) != set(shapes):
        missing = sorted(set(shapes) - set(got))
        extra = sorted(set(got) - set(shapes))
        raise CheckpointError(f"checkpoint parameters do not match the config (missing {missing}, unexpected {extra})")
    for k, s in shapes.items():
        if got[k].shape != s:
            raise CheckpointError(f"parameter {k} has shape {got[k].shape}, config implies {s}")
    params = FactParams(cfg, {k: Tensor(got[k].astype(dtype), requires_grad=True, name=k) for k in shapes})
    norm = FeatureNorm.from_tensors(tensors["norm"]) if "norm" in tensors else None
    state = None
    if "adam.schedule" in scalars:
        state = AdamState(
            step=int(scalars["step"]),
            beta1=float(scalars["adam.beta1"]),
            beta2=float(scalars["adam.beta2"]),
            epsilon=float(scalars["adam.epsilon"]),
            schedule=parse_schedule(scalars["adam.schedule"]),
            m=dict(tensors.get("adam_m", {})),
            v=dict(tensors.get("adam_v", {})),
        )
    return params, state, norm
