from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_STRIDE = 10


class DataError(ValueError):
    """Input data that cannot be used (exit code 3 at the CLI)."""


class EmptyDatasetError(DataError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    seed_frames: int
    music_frames: int
    future_n: int
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        if self.seed_frames < 1:
            raise ValueError("seed_frames must be >= 1")
        if self.music_frames < self.seed_frames:
            raise ValueError(f"music_frames ({self.music_frames}) must be >= seed_frames ({self.seed_frames})")
        if self.future_n < 1:
            raise ValueError("future_n must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @classmethod
    def from_config(cls, cfg, stride: int = DEFAULT_STRIDE) -> "WindowSpec":
        return cls(cfg.seed_frames, cfg.music_frames, cfg.future_n, stride)


def window_starts(motion_len: int, audio_len: int, spec: WindowSpec) -> np.ndarray:
    last = min(motion_len - (spec.seed_frames + spec.future_n), audio_len - spec.music_frames)
    if last < 0:
        return np.zeros(0, dtype=int)
    return np.arange(0, last + 1, spec.stride)


def make_windows(motion, audio, spec: WindowSpec):
    """Aligned (seed, music, target) triples starting every ``stride`` frames.

    A window at ``f`` takes motion [f, f+T), music [f, f+T') and target
    motion [f+T, f+T+N). Windows that would run off either sequence are
    dropped. Returns three stacked arrays.
    """
    motion = np.asarray(motion)
    audio = np.asarray(audio)
    starts = window_starts(len(motion), len(audio), spec)
    if len(starts) == 0:
        raise EmptyDatasetError(
            f"no window fits: motion has {len(motion)} frames (need {spec.seed_frames + spec.future_n}), "
            f"music has {len(audio)} (need {spec.music_frames})"
        )
    T, Tm, N = spec.seed_frames, spec.music_frames, spec.future_n
    seeds = np.stack([motion[f : f + T] for f in starts])
    musics = np.stack([audio[f : f + Tm] for f in starts])
    targets = np.stack([motion[f + T : f + T + N] for f in starts])
    return seeds, musics, targets
