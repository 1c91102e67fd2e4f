from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter1d

from ..motion import InsufficientFramesError, MotionSequence, Skeleton, joint_velocities
from .distances import MetricInputError

SIGMA = 3.0
SMOOTH_FRAMES = 5


def kinetic_velocity(m: MotionSequence, s: Skeleton) -> np.ndarray:
    """Mean joint speed per frame, smoothed over 5 frames.

    Frame t uses the average of the forward differences on either side of
    it, so index t of the curve is motion frame t (ends are copied from
    their neighbours).
    """
    if len(m) < 5:
        raise InsufficientFramesError(f"kinematic beats need at least 5 frames, got {len(m)}")
    v = joint_velocities(m, s)
    centred = 0.5 * (v[:-1] + v[1:])
    speed = np.linalg.norm(centred, axis=-1).mean(axis=1)
    speed = np.concatenate([speed[:1], speed, speed[-1:]])
    return uniform_filter1d(speed, SMOOTH_FRAMES, mode="nearest")


def local_minima(curve, rel_tol: float = 1e-9) -> np.ndarray:
    """Indices whose both neighbours are strictly larger.

    Differences below ``rel_tol`` times the curve's peak count as ties, so
    rounding noise on a flat curve yields no minima.
    """
    c = np.asarray(curve, dtype=np.float64)
    if len(c) < 3:
        return np.zeros(0, dtype=int)
    tol = rel_tol * np.abs(c).max()
    inner = (c[1:-1] < c[:-2] - tol) & (c[1:-1] < c[2:] - tol)
    return np.nonzero(inner)[0] + 1


def detect_kinematic_beats(m: MotionSequence, s: Skeleton) -> np.ndarray:
    return local_minima(kinetic_velocity(m, s))


def beat_align(kinematic_beats, music_beats, sigma: float = SIGMA) -> float:
    """Mean over kinematic beats of exp(-d^2 / (2 sigma^2)), d = distance to the nearest music beat."""
    kin = np.asarray(kinematic_beats, dtype=np.float64).reshape(-1)
    mus = np.asarray(music_beats, dtype=np.float64).reshape(-1)
    if kin.size == 0 or mus.size == 0:
        raise MetricInputError("beat alignment is undefined for an empty beat set")
    d2 = ((kin[:, None] - mus[None, :]) ** 2).min(axis=1)
    return float(np.exp(-d2 / (2.0 * sigma**2)).mean())
