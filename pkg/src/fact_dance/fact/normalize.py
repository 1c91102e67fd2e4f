"""Per-channel standardisation of motion and music features.

The model sees standardised inputs and predicts standardised motion; the
statistics travel with the checkpoint so generation can undo them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import DimensionError

STD_FLOOR = 1e-2


@dataclass
class FeatureNorm:
    motion_mean: np.ndarray
    motion_std: np.ndarray
    audio_mean: np.ndarray
    audio_std: np.ndarray

    @classmethod
    def identity(cls, motion_dim: int = 219, audio_dim: int = 35) -> "FeatureNorm":
        return cls(np.zeros(motion_dim), np.ones(motion_dim), np.zeros(audio_dim), np.ones(audio_dim))

    @classmethod
    def fit(cls, motions, audios, floor: float = STD_FLOOR) -> "FeatureNorm":
        """Statistics over all frames of the given (T, D) sequences."""
        m = np.concatenate([np.asarray(x, dtype=np.float64) for x in motions], axis=0)
        a = np.concatenate([np.asarray(x, dtype=np.float64) for x in audios], axis=0)
        return cls(m.mean(0), np.maximum(m.std(0), floor), a.mean(0), np.maximum(a.std(0), floor))

    def motion_in(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != len(self.motion_mean):
            raise DimensionError(f"motion features have width {x.shape[-1]}, norm expects {len(self.motion_mean)}")
        return (x - self.motion_mean) / self.motion_std

    def motion_out(self, z) -> np.ndarray:
        return np.asarray(z) * self.motion_std + self.motion_mean

    def audio_in(self, y) -> np.ndarray:
        y = np.asarray(y)
        if y.shape[-1] != len(self.audio_mean):
            raise DimensionError(f"music features have width {y.shape[-1]}, norm expects {len(self.audio_mean)}")
        return (y - self.audio_mean) / self.audio_std

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "norm.motion_mean": self.motion_mean,
            "norm.motion_std": self.motion_std,
            "norm.audio_mean": self.audio_mean,
            "norm.audio_std": self.audio_std,
        }

    @classmethod
    def from_tensors(cls, d: dict[str, np.ndarray]) -> "FeatureNorm":
        return cls(*(np.asarray(d[k], dtype=np.float64) for k in (
            "norm.motion_mean", "norm.motion_std", "norm.audio_mean", "norm.audio_std")))
