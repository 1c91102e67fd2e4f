"""FACT: motion and audio transformers feeding a cross-modal transformer.

Motion embeddings come first in the concatenated cross-modal sequence; the
prediction head reads the last ``n_out`` positions of that sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import (
    DimensionError,
    Tensor,
    concat,
    layer_norm,
    linear_forward,
    mean_squared_error,
    multi_head_attention,
    relu,
    reshape,
)
from .config import FactConfig

LAYER_KEYS = ("ln1.g", "ln1.b", "wq", "wk", "wv", "wo", "bo", "ln2.g", "ln2.b", "w1", "b1", "w2", "b2")


class LengthError(DimensionError):
    pass


@dataclass
class FactParams:
    config: FactConfig
    tensors: dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def layer(self, stack: str, i: int) -> dict[str, Tensor]:
        prefix = f"{stack}.{i}."
        return {k: self.tensors[prefix + k] for k in LAYER_KEYS}

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def copy(self) -> "FactParams":
        return FactParams(
            self.config, {k: Tensor(v.data.copy(), requires_grad=True, name=k) for k, v in self.tensors.items()}
        )


def _layer_shapes(h: int, ff: int) -> dict[str, tuple[int, ...]]:
    return {
        "ln1.g": (h,), "ln1.b": (h,),
        "wq": (h, h), "wk": (h, h), "wv": (h, h), "wo": (h, h), "bo": (h,),
        "ln2.g": (h,), "ln2.b": (h,),
        "w1": (h, ff), "b1": (ff,), "w2": (ff, h), "b2": (h,),
    }


def parameter_shapes(cfg: FactConfig) -> dict[str, tuple[int, ...]]:
    h = cfg.hidden
    shapes: dict[str, tuple[int, ...]] = {
        "motion_embed.w": (cfg.motion_dim, h),
        "motion_embed.b": (h,),
        "motion_pos": (cfg.seed_frames, h),
    }
    if cfg.fusion != "none":
        shapes["audio_embed.w"] = (cfg.audio_dim, h)
        shapes["audio_embed.b"] = (h,)
        shapes["audio_pos"] = (cfg.music_frames, h)
    for stack, n in (("motion", cfg.motion_layers), ("audio", cfg.audio_layers), ("cross", cfg.cross_layers)):
        for i in range(n):
            for k, s in _layer_shapes(h, cfg.ff_mult * h).items():
                shapes[f"{stack}.{i}.{k}"] = s
    shapes["final_ln.g"] = (h,)
    shapes["final_ln.b"] = (h,)
    shapes["head.w"] = (h, cfg.motion_dim)
    shapes["head.b"] = (cfg.motion_dim,)
    return shapes


def init_model(cfg: FactConfig, seed: int = 0) -> FactParams:
    """Normal(0, init_std) projections and positional tables, zero biases, unit norm gains."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    dtype = np.dtype(cfg.dtype)
    tensors = {}
    for name, shape in parameter_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if name.endswith(".g"):
            data = np.ones(shape)
        elif leaf.startswith("b"):
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, cfg.init_std, size=shape)
        tensors[name] = Tensor(data.astype(dtype), requires_grad=True, name=name)
    return FactParams(cfg, tensors)


def causal_mask(length: int, dtype=np.float64) -> np.ndarray:
    return np.triu(np.full((length, length), -np.inf, dtype=dtype), k=1)


def attention_forward(
    x: Tensor, layer: dict[str, Tensor], heads: int, mask_mode: str = "full", max_len: int | None = None
) -> Tensor:
    """One pre-norm block: x + Attn(LN(x)), then + FF(LN(.)).

    Per head, ``softmax((Q K^T + M) / sqrt(D_h)) V`` with ``M`` zero for full
    attention and upper-triangular -inf for causal attention.
    """
    squeeze = x.data.ndim == 2
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    B, L, h = x.shape
    if max_len is not None and L > max_len:
        raise LengthError(f"sequence length {L} exceeds the configured maximum {max_len}")
    hn = layer_norm(x, layer["ln1.g"], layer["ln1.b"])
    mask = causal_mask(L, x.dtype) if mask_mode == "causal" else None
    ctx = multi_head_attention(hn, layer["wq"], layer["wk"], layer["wv"], heads, mask)
    x = x + linear_forward(ctx, layer["wo"], layer["bo"])
    hn = layer_norm(x, layer["ln2.g"], layer["ln2.b"])
    x = x + linear_forward(relu(linear_forward(hn, layer["w1"], layer["b1"])), layer["w2"], layer["b2"])
    if squeeze:
        x = reshape(x, x.shape[1:])
    return x


def _stack(params: FactParams, name: str, n: int, x: Tensor) -> Tensor:
    cfg = params.config
    for i in range(n):
        x = attention_forward(x, params.layer(name, i), cfg.heads, cfg.mask_mode, cfg.context_length)
    return x


def _as_batch(arr, length: int, dim: int, what: str, dtype) -> tuple[Tensor, bool]:
    data = arr.data if isinstance(arr, Tensor) else np.asarray(arr)
    single = data.ndim == 2
    if single:
        data = data[None]
    if data.ndim != 3 or data.shape[1:] != (length, dim):
        raise DimensionError(f"{what} must be ({length}, {dim}) per item, got {data.shape[1:] if data.ndim == 3 else data.shape}")
    if isinstance(arr, Tensor) and not single:
        return arr, single
    if isinstance(arr, Tensor):
        return reshape(arr, data.shape), single
    return Tensor(data.astype(dtype, copy=False), check=False), single


def fact_forward(params: FactParams, motion, audio) -> Tensor:
    """Predict ``n_out`` frames from a seed window and its music window.

    ``motion`` is (T, 219) or (B, T, 219); ``audio`` is (T', 35) or
    (B, T', 35). With future-N supervision the rows are frames T+1..T+N.
    With ``predict_offset`` the head output is an offset from the most
    recent input frame rather than an absolute pose.
    """
    cfg = params.config
    dtype = np.dtype(cfg.dtype)
    m, single = _as_batch(motion, cfg.seed_frames, cfg.motion_dim, "motion", dtype)
    hx = linear_forward(m, params["motion_embed.w"], params["motion_embed.b"]) + params["motion_pos"]
    hx = _stack(params, "motion", cfg.motion_layers, hx)
    if cfg.fusion == "none":
        seq = hx
    else:
        a, _ = _as_batch(audio, cfg.music_frames, cfg.audio_dim, "audio", dtype)
        if a.shape[0] != m.shape[0]:
            raise DimensionError(f"batch mismatch: motion {m.shape[0]} vs audio {a.shape[0]}")
        hy = linear_forward(a, params["audio_embed.w"], params["audio_embed.b"]) + params["audio_pos"]
        hy = _stack(params, "audio", cfg.audio_layers, hy)
        seq = _stack(params, "cross", cfg.cross_layers, concat([hx, hy], axis=1))
    tail = seq[:, seq.shape[1] - cfg.n_out :, :]
    tail = layer_norm(tail, params["final_ln.g"], params["final_ln.b"])
    out = linear_forward(tail, params["head.w"], params["head.b"])
    if cfg.predict_offset:
        # future-N rows extend the last seed frame; shift-by-1 row i extends input frame i
        anchor = m[:, cfg.seed_frames - 1 :, :] if cfg.supervision == "future_n" else m
        out = out + anchor
    if single:
        out = reshape(out, out.shape[1:])
    return out


def future_n_loss(pred: Tensor, target) -> Tensor:
    """Mean squared error over every predicted entry."""
    return mean_squared_error(pred, target)
