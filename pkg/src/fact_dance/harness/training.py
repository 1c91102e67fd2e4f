from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..fact import FactConfig, FactParams, FeatureNorm, init_model, supervision_targets, train_step
from ..numerics import AdamState
from .config import TrainSettings
from .corpus import Sequence
from .windows import EmptyDatasetError, WindowSpec, window_starts

log = logging.getLogger(__name__)


@dataclass
class WindowSet:
    """Training windows as (sequence, start) references; batches are sliced on demand."""

    motions: list[np.ndarray]  # (T_i, 219) per sequence
    musics: list[np.ndarray]  # (L_i, 35) per sequence
    refs: np.ndarray  # (W, 2) sequence index and start frame
    spec: WindowSpec

    def __len__(self) -> int:
        return len(self.refs)

    def gather(self, idx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        T, Tm, N = self.spec.seed_frames, self.spec.music_frames, self.spec.future_n
        refs = self.refs[np.asarray(idx)]
        seeds = np.stack([self.motions[i][f : f + T] for i, f in refs])
        musics = np.stack([self.musics[i][f : f + Tm] for i, f in refs])
        futures = np.stack([self.motions[i][f + T : f + T + N] for i, f in refs])
        return seeds, musics, futures

    def mapped(self, motion_fn, music_fn) -> "WindowSet":
        """The same windows over per-sequence transformed features."""
        return WindowSet([motion_fn(m) for m in self.motions], [music_fn(a) for a in self.musics], self.refs, self.spec)

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.gather(np.arange(len(self)))


def collect_windows(seqs: list[Sequence], spec: WindowSpec) -> WindowSet:
    motions, musics, refs = [], [], []
    for s in seqs:
        starts = window_starts(len(s.motion), len(s.music), spec)
        if len(starts) == 0:
            log.warning("sequence %s is too short for any window; skipped", s.name)
            continue
        refs.append(np.stack([np.full(len(starts), len(motions)), starts], axis=1))
        motions.append(np.asarray(s.motion))
        musics.append(np.asarray(s.music))
    if not refs:
        raise EmptyDatasetError("no training windows in the dataset")
    return WindowSet(motions, musics, np.concatenate(refs), spec)


@dataclass
class TrainResult:
    params: FactParams
    state: AdamState
    norm: FeatureNorm | None
    losses: list[float] = field(default_factory=list)


def fit_norm(seqs: list[Sequence]) -> FeatureNorm:
    return FeatureNorm.fit([s.motion for s in seqs], [s.music for s in seqs])


def batch_order(n_windows: int, batch_size: int, steps: int, seed: int) -> np.ndarray:
    """Window indices for every step: reshuffled each pass over the data."""
    rng = np.random.default_rng([seed, 17])
    need = steps * batch_size
    chunks, have = [], 0
    while have < need:
        chunks.append(rng.permutation(n_windows))
        have += n_windows
    flat = np.concatenate(chunks)[:need] if chunks else np.zeros(0, dtype=int)
    return flat.reshape(steps, batch_size)


def train_model(
    cfg: FactConfig,
    settings: TrainSettings,
    windows: WindowSet,
    norm: FeatureNorm | None = None,
    on_step: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Seeded Adam training on fixed windows.

    Init and batch order both come from ``settings.seed``; everything else
    is deterministic, so two runs give identical parameters.
    """
    params = init_model(cfg, seed=settings.seed)
    state = AdamState(schedule=settings.lr_schedule)
    dtype = np.dtype(cfg.dtype)
    if norm is not None:
        windows = windows.mapped(norm.motion_in, norm.audio_in)
    windows = windows.mapped(lambda m: m.astype(dtype, copy=False), lambda a: a.astype(dtype, copy=False))
    order = batch_order(len(windows), settings.batch_size, settings.steps, settings.seed)
    losses = []
    for step, idx in enumerate(order):
        seeds, musics, futures = windows.gather(idx)
        loss = train_step(params, seeds, musics, supervision_targets(cfg, seeds, futures), state)
        losses.append(loss)
        if on_step is not None:
            on_step(step, loss)
        if (step + 1) % settings.log_every == 0:
            log.info("step %d loss %.6f lr %.2e", step + 1, np.mean(losses[-settings.log_every:]), state.learning_rate())
    return TrainResult(params, state, norm, losses)
