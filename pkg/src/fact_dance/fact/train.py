from __future__ import annotations

import numpy as np

from ..numerics import AdamState, DimensionError, TrainingDivergenceError, adam_step
from .model import FactParams, fact_forward, future_n_loss


def shift_by_one_targets(seed: np.ndarray, future: np.ndarray) -> np.ndarray:
    """Inputs shifted one frame ahead: frames 2..T+1 of the window."""
    return np.concatenate([seed[..., 1:, :], future[..., :1, :]], axis=-2)


def supervision_targets(cfg, seed: np.ndarray, future: np.ndarray) -> np.ndarray:
    if cfg.supervision == "shift_by_1":
        return shift_by_one_targets(seed, future)
    return future[..., : cfg.future_n, :]


def train_step(params: FactParams, motion, audio, target, state: AdamState) -> float:
    """Forward, backward and one Adam update on a batch; returns the batch-mean loss."""
    cfg = params.config
    target = np.asarray(target)
    want = (cfg.n_out, cfg.motion_dim)
    if target.shape[-2:] != want:
        raise DimensionError(f"targets must be {want} per item for {cfg.supervision} supervision, got {target.shape}")
    params.zero_grad()
    pred = fact_forward(params, motion, audio)
    loss = future_n_loss(pred, target.astype(pred.dtype, copy=False))
    value = float(loss.data)
    if not np.isfinite(value):
        raise TrainingDivergenceError(f"non-finite loss at step {state.step}")
    loss.backward()
    grads = {k: t.grad for k, t in params.tensors.items() if t.grad is not None}
    adam_step(params.tensors, grads, state)
    return value
