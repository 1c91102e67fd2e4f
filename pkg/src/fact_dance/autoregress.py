"""Sliding-window autoregressive generation with a trained FACT model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fact import FactParams, FeatureNorm, fact_forward
from .motion import FPS, MotionSequence, Skeleton, orthonormalize, sequence_positions
from .numerics import DimensionError, no_grad


class CoverageError(ValueError):
    pass


@dataclass
class GenerationRequest:
    seed: np.ndarray  # (T, 219) motion features
    music: np.ndarray  # (L, 35) music features, frame 0 aligned with seed frame 0
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def required_music_frames(params: FactParams, horizon: int) -> int:
    return params.config.music_frames + horizon - 1


def generate_batch(params: FactParams, seeds, musics, horizon: int, return_raw: bool = False, norm: FeatureNorm | None = None):
    """Generate ``horizon`` frames for each (seed, music) pair at once.

    Each step feeds the current windows to the model, keeps the predicted
    next frame, slides the motion window onto it and the music window one
    frame forward. The raw prediction is fed back; only emitted frames are
    orthonormalised. With ``norm`` the model runs on standardised features
    and the emitted frames are mapped back before orthonormalisation.
    """
    cfg = params.config
    seeds = np.asarray(seeds)
    musics = np.asarray(musics)
    if seeds.ndim != 3 or seeds.shape[1:] != (cfg.seed_frames, cfg.motion_dim):
        raise DimensionError(f"seeds must be (B, {cfg.seed_frames}, {cfg.motion_dim}), got {seeds.shape}")
    need = required_music_frames(params, horizon)
    if musics.ndim != 3 or musics.shape[0] != seeds.shape[0] or musics.shape[2] != cfg.audio_dim:
        raise DimensionError(f"musics must be (B, L, {cfg.audio_dim}) matching the seeds, got {musics.shape}")
    if musics.shape[1] < need:
        raise CoverageError(f"music covers {musics.shape[1]} frames; {need} are required for horizon {horizon}")
    if norm is not None:
        seeds = norm.motion_in(seeds)
        musics = norm.audio_in(musics)
    dtype = np.dtype(cfg.dtype)
    B, T = seeds.shape[0], cfg.seed_frames
    timeline = np.empty((B, T + horizon, cfg.motion_dim), dtype=dtype)
    timeline[:, :T] = seeds
    musics = musics.astype(dtype, copy=False)
    row = cfg.next_frame_index
    with no_grad():
        for k in range(horizon):
            pred = fact_forward(params, timeline[:, k : k + T], musics[:, k : k + cfg.music_frames])
            timeline[:, T + k] = pred.data[:, row]
    raw = timeline[:, T:].astype(np.float64)
    if norm is not None:
        raw = norm.motion_out(raw)
    out = raw.copy()
    rot = out[:, :, : 24 * 9].reshape(B, horizon, 24, 3, 3)
    out[:, :, : 24 * 9] = orthonormalize(rot).reshape(B, horizon, -1)
    return (out, raw) if return_raw else out


def generate(params: FactParams, req: GenerationRequest, norm: FeatureNorm | None = None) -> MotionSequence:
    out = generate_batch(params, req.seed[None], req.music[None], req.horizon, norm=norm)[0]
    return MotionSequence.from_features(out, orthonormal=False)


def freeze_profile(m: MotionSequence, s: Skeleton, span_seconds: float = 2.0) -> np.ndarray:
    """Mean per-frame joint displacement (meters) over every sliding span."""
    pos = sequence_positions(m, s)
    disp = np.linalg.norm(np.diff(pos, axis=0), axis=-1).mean(axis=1)
    span = int(round(span_seconds * m.fps))
    if len(disp) < span:
        return np.array([disp.mean()])
    c = np.concatenate([[0.0], np.cumsum(disp)])
    return (c[span:] - c[:-span]) / span


def freeze_diagnostic(m: MotionSequence, s: Skeleton, span_seconds: float = 2.0) -> float:
    """Smallest 2-second mean joint displacement; near zero means the motion froze."""
    return float(freeze_profile(m, s, span_seconds).min())


FREEZE_FLOOR = 1e-3  # m per frame at 60 FPS, i.e. 6 cm/s mean joint speed
