"""Beat-locked synthetic music/dance pairs.

Music is a click on every beat over a sustained chord that changes each bar.
Motion advances a phase that stops dead on every beat (so all joints pause
there) and moves fastest between beats. Each joint sweeps back and forth
linearly in that phase (a triangle wave whose turning points sit on beats),
so every joint's speed follows the same per-beat profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scipy.ndimage import gaussian_filter1d

from ..audiofeat import SAMPLE_RATE, AudioClip
from ..motion import FPS, N_JOINTS, MotionSequence, axis_angle_to_matrix

# joints that dance, with swing amplitude in radians
_ACTIVE = {
    1: 0.35, 2: 0.35, 4: 0.5, 5: 0.5, 3: 0.15, 6: 0.12, 9: 0.1, 12: 0.15, 15: 0.2,
    13: 0.15, 14: 0.15, 16: 0.6, 17: 0.6, 18: 0.7, 19: 0.7, 20: 0.3, 21: 0.3,
}


NOISE_SMOOTH_FRAMES = 8


@dataclass(frozen=True)
class SyntheticSpec:
    bpm: float = 120.0
    duration: float = 20.0
    pattern_id: int = 0
    noise: float = 0.0
    seed: int = 0
    music_seed: int | None = None

    def __post_init__(self):
        if not 60.0 <= self.bpm <= 180.0:
            raise ValueError(f"bpm must lie in [60, 180], got {self.bpm}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def music_key(self) -> int:
        return self.seed if self.music_seed is None else self.music_seed


@dataclass
class SyntheticPair:
    clip: AudioClip
    motion: MotionSequence
    beat_frames: np.ndarray  # ground-truth beat frames
    beat_times: np.ndarray  # seconds


def beat_times(spec: SyntheticSpec) -> np.ndarray:
    period = 60.0 / spec.bpm
    offset = np.random.default_rng([spec.music_key, 1]).uniform(0.2 * period, period)
    return np.arange(offset, spec.duration, period)


def beat_phase(t: np.ndarray, offset: float, period: float) -> np.ndarray:
    """Monotone phase, +1 per beat, with zero derivative exactly on beats."""
    b = (t - offset) / period
    k = np.floor(b)
    u = b - k
    return k + u - np.sin(2.0 * np.pi * u) / (2.0 * np.pi)


def synth_music(spec: SyntheticSpec, times: np.ndarray) -> AudioClip:
    rng = np.random.default_rng([spec.music_key, 2])
    n = int(round(spec.duration * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    y = np.zeros(n)
    # chord bed: root note per bar, major/minor triad
    bar = 4 * 60.0 / spec.bpm
    n_bars = int(np.ceil(spec.duration / bar)) + 1
    roots = rng.integers(48, 60, size=n_bars)
    minor = rng.random(n_bars) < 0.5
    first = times[0] if len(times) else 0.0
    bar_idx = np.clip(np.floor((t - first) / bar).astype(int) + 1, 0, n_bars - 1)
    for interval_major, interval_minor in ((0, 0), (4, 3), (7, 7)):
        midi = roots[bar_idx] + np.where(minor[bar_idx], interval_minor, interval_major)
        freq = 440.0 * 2.0 ** ((midi - 69) / 12.0)
        phase = 2.0 * np.pi * np.cumsum(freq) / SAMPLE_RATE
        y += 0.05 * np.sin(phase)
    click_len = int(0.03 * SAMPLE_RATE)
    tc = np.arange(click_len) / SAMPLE_RATE
    click = np.exp(-tc / 0.005) * np.sin(2.0 * np.pi * 1500.0 * tc)
    for bt in times:
        s = int(round(bt * SAMPLE_RATE))
        e = min(n, s + click_len)
        y[s:e] += 0.6 * click[: e - s]
    return AudioClip(np.clip(y, -1.0, 1.0), SAMPLE_RATE)


def pattern_params(pattern_id: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng([pattern_id, 3])
    joints = np.array(sorted(_ACTIVE))
    amp = np.array([_ACTIVE[j] for j in joints])
    axes = rng.normal(size=(len(joints), 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return {
        "joints": joints,
        "amplitude": amp * rng.uniform(0.5, 1.0, size=len(joints)),
        "axis": axes,
        "beat_offset": rng.integers(0, 4, size=len(joints)),
        "base": rng.normal(0.0, 0.15, size=(len(joints), 3)),
        "sway": rng.uniform(0.03, 0.1, size=2),
    }


def triangle(x: np.ndarray) -> np.ndarray:
    """Period-2 triangle wave in [-1, 1] with turning points at integers."""
    return 1.0 - 2.0 * np.abs((x % 2.0) - 1.0)


def synth_motion(spec: SyntheticSpec, times: np.ndarray) -> MotionSequence:
    n = int(np.floor(spec.duration * FPS + 1e-9))
    t = np.arange(n) / FPS
    period = 60.0 / spec.bpm
    phi = beat_phase(t, times[0], period)
    p = pattern_params(spec.pattern_id)
    aa = np.zeros((n, N_JOINTS, 3))
    # arms hang down from the T-pose
    aa[:, 16, 2] = -1.2
    aa[:, 17, 2] = 1.2
    # one sweep per beat: a seed shorter than a bar still pins down the whole pattern
    swing = triangle(phi[:, None] + p["beat_offset"][None, :])
    aa[:, p["joints"]] += p["base"][None] + (p["amplitude"][None, :, None] * swing[:, :, None]) * p["axis"][None]
    if spec.noise > 0:
        rng = np.random.default_rng([spec.seed, 4])
        wobble = gaussian_filter1d(rng.normal(size=aa.shape), sigma=NOISE_SMOOTH_FRAMES, axis=0)
        aa += spec.noise * wobble / wobble.std()
    trans = np.zeros((n, 3))
    trans[:, 0] = p["sway"][0] * triangle(0.5 * phi)
    trans[:, 1] = 0.92 + p["sway"][1] * 0.5 * triangle(phi)
    return MotionSequence(axis_angle_to_matrix(aa), trans, FPS)


def synthesize_dataset(spec: SyntheticSpec) -> SyntheticPair:
    times = beat_times(spec)
    clip = synth_music(spec, times)
    motion = synth_motion(spec, times)
    frames = np.round(times * FPS).astype(int)
    frames = frames[frames < len(motion)]
    return SyntheticPair(clip, motion, frames, times)
