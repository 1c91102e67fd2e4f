"""Pose representation, rotations, skeleton and forward kinematics.

A frame is 24 joint rotation matrices (SMPL joint order) plus a global root
translation in meters, y-up. Flattened it is the 219-dim network feature:
24 row-major 3x3 blocks followed by the translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .numerics import DimensionError

N_JOINTS = 24
MOTION_DIM = N_JOINTS * 9 + 3
FPS = 60

JOINT_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hand", "right_hand",
)
# index of each joint's mirror image
MIRROR = np.array([0, 2, 1, 3, 5, 4, 6, 8, 7, 9, 11, 10, 12, 14, 13, 15, 17, 16, 19, 18, 21, 20, 23, 22])

_ORTHO_TOL = 1e-12


class DegenerateRotationError(ValueError):
    pass


class InsufficientFramesError(ValueError):
    pass


@dataclass(frozen=True)
class Skeleton:
    parent: np.ndarray  # (24,) int, root = -1
    offsets: np.ndarray  # (24, 3) meters

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=int)
        if parent.shape != (N_JOINTS,) or np.asarray(self.offsets).shape != (N_JOINTS, 3):
            raise DimensionError("skeleton needs 24 parents and 24x3 offsets")
        if parent[0] != -1:
            raise ValueError("joint 0 must be the root")
        for j in range(1, N_JOINTS):
            if not 0 <= parent[j] < j:
                raise ValueError(f"parent[{j}]={parent[j]} violates parent[j] < j")

    @classmethod
    def from_text(cls, text: str) -> "Skeleton":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        if len(rows) != N_JOINTS:
            raise DimensionError(f"skeleton file has {len(rows)} joints, expected {N_JOINTS}")
        parent = np.array([int(r[0]) for r in rows])
        offsets = np.array([[float(x) for x in r[1:4]] for r in rows])
        return cls(parent, offsets)

    def to_text(self) -> str:
        return "".join(f"{p} {o[0]:.6f} {o[1]:.6f} {o[2]:.6f}\n" for p, o in zip(self.parent, self.offsets))


def load_skeleton(path: str | Path | None = None) -> Skeleton:
    if path is None:
        text = resources.files("fact_dance.data").joinpath("skeleton.txt").read_text()
    else:
        text = Path(path).read_text()
    return Skeleton.from_text(text)


def axis_angle_to_matrix(aa) -> np.ndarray:
    """Rodrigues formula; works on (..., 3) input."""
    aa = np.asarray(aa, dtype=np.float64)
    theta = np.linalg.norm(aa, axis=-1, keepdims=True)
    small = theta < 1e-12
    axis = aa / np.where(small, 1.0, theta)
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    zeros = np.zeros_like(x)
    K = np.stack([zeros, -z, y, z, zeros, -x, -y, x, zeros], axis=-1).reshape(*aa.shape[:-1], 3, 3)
    s = np.sin(theta)[..., None]
    c = np.cos(theta)[..., None]
    eye = np.broadcast_to(np.eye(3), K.shape)
    R = eye + s * K + (1.0 - c) * (K @ K)
    return np.where(small[..., None], eye, R)


def orthonormalize(R) -> np.ndarray:
    """Nearest rotation (orthogonal polar factor with det +1) of each 3x3 block.

    Blocks that are already rotations to within 1e-12 are returned untouched,
    which makes the map exactly idempotent.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.shape[-2:] != (3, 3):
        raise DimensionError(f"expected (..., 3, 3), got {R.shape}")
    flat = R.reshape(-1, 3, 3)
    out = flat.copy()
    err = np.abs(flat @ np.swapaxes(flat, -1, -2) - np.eye(3)).max(axis=(-1, -2))
    fix = (err > _ORTHO_TOL) | (np.linalg.det(flat) <= 0)
    if fix.any():
        U, S, Vt = np.linalg.svd(flat[fix])
        if (S[:, -1] <= 1e-9 * np.maximum(S[:, 0], 1e-300)).any():
            raise DegenerateRotationError("rank-deficient matrix cannot be projected to a rotation")
        d = np.sign(np.linalg.det(U @ Vt))
        U[:, :, -1] *= d[:, None]
        out[fix] = U @ Vt
    return out.reshape(R.shape)


@dataclass
class PoseFrame:
    rotations: np.ndarray  # (24, 3, 3)
    translation: np.ndarray  # (3,)

    def is_valid(self, atol: float = 1e-6) -> bool:
        """Finite, and every joint rotation orthonormal with determinant +1."""
        return bool(rotations_valid(self.rotations, atol).all()) and bool(np.all(np.isfinite(self.translation)))


def rotations_valid(R, atol: float = 1e-6) -> np.ndarray:
    """Per-matrix check of R R^T = I and det R = 1 over the trailing (3, 3) axes."""
    R = np.asarray(R, dtype=np.float64)
    finite = np.isfinite(R).all(axis=(-2, -1))
    gram = R @ np.swapaxes(R, -1, -2)
    ortho = np.abs(gram - np.eye(3)).max(axis=(-2, -1)) <= atol
    det = np.abs(np.linalg.det(np.where(finite[..., None, None], R, 0.0)) - 1.0) <= atol
    return finite & ortho & det


def identity_pose() -> PoseFrame:
    return PoseFrame(np.tile(np.eye(3), (N_JOINTS, 1, 1)), np.zeros(3))


def encode_pose(p: PoseFrame) -> np.ndarray:
    rot = np.asarray(p.rotations, dtype=np.float64)
    if rot.shape != (N_JOINTS, 3, 3):
        raise DimensionError(f"rotations must be (24, 3, 3), got {rot.shape}")
    return np.concatenate([rot.reshape(-1), np.asarray(p.translation, dtype=np.float64).reshape(3)])


def decode_pose(v) -> PoseFrame:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (MOTION_DIM,):
        raise DimensionError(f"pose vector must have length {MOTION_DIM}, got shape {v.shape}")
    return PoseFrame(orthonormalize(v[: N_JOINTS * 9].reshape(N_JOINTS, 3, 3)), v[N_JOINTS * 9 :].copy())


@dataclass
class MotionSequence:
    rotations: np.ndarray  # (T, 24, 3, 3)
    translation: np.ndarray  # (T, 3)
    fps: int = FPS

    def __post_init__(self):
        if self.rotations.ndim != 4 or self.rotations.shape[1:] != (N_JOINTS, 3, 3):
            raise DimensionError(f"rotations must be (T, 24, 3, 3), got {self.rotations.shape}")
        if len(self.rotations) < 1 or self.translation.shape != (len(self.rotations), 3):
            raise DimensionError("motion needs T >= 1 frames and a (T, 3) translation")

    def __len__(self) -> int:
        return len(self.rotations)

    @classmethod
    def from_features(cls, feats, fps: int = FPS, orthonormal: bool = True) -> "MotionSequence":
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != MOTION_DIM:
            raise DimensionError(f"motion features must be (T, {MOTION_DIM}), got {feats.shape}")
        rot = feats[:, : N_JOINTS * 9].reshape(-1, N_JOINTS, 3, 3)
        if orthonormal:
            rot = orthonormalize(rot)
        return cls(rot.copy(), feats[:, N_JOINTS * 9 :].copy(), fps)

    def to_features(self) -> np.ndarray:
        return np.concatenate([self.rotations.reshape(len(self), -1), self.translation], axis=1)

    def is_valid(self, atol: float = 1e-6) -> bool:
        """Every frame passes the PoseFrame invariants."""
        return bool(rotations_valid(self.rotations, atol).all()) and bool(np.all(np.isfinite(self.translation)))

    def frame(self, t: int) -> PoseFrame:
        return PoseFrame(self.rotations[t], self.translation[t])


def _fk(rotations: np.ndarray, translation: np.ndarray, s: Skeleton) -> np.ndarray:
    lead = rotations.shape[:-3]
    pos = np.zeros(lead + (N_JOINTS, 3))
    glob = np.zeros(lead + (N_JOINTS, 3, 3))
    glob[..., 0, :, :] = rotations[..., 0, :, :]
    pos[..., 0, :] = translation
    for j in range(1, N_JOINTS):
        p = s.parent[j]
        glob[..., j, :, :] = glob[..., p, :, :] @ rotations[..., j, :, :]
        pos[..., j, :] = pos[..., p, :] + glob[..., p, :, :] @ s.offsets[j]
    return pos


def forward_kinematics(p: PoseFrame, s: Skeleton) -> np.ndarray:
    """World positions (24, 3) of every joint."""
    return _fk(np.asarray(p.rotations), np.asarray(p.translation), s)


def sequence_positions(m: MotionSequence, s: Skeleton) -> np.ndarray:
    return _fk(m.rotations, m.translation, s)


def joint_velocities(m: MotionSequence, s: Skeleton) -> np.ndarray:
    """Forward-difference joint velocities, (T-1, 24, 3) in m/s."""
    if len(m) < 2:
        raise InsufficientFramesError(f"velocities need at least 2 frames, got {len(m)}")
    pos = sequence_positions(m, s)
    return np.diff(pos, axis=0) * m.fps


def mirror_sequence(m: MotionSequence) -> MotionSequence:
    """Reflect across the x = 0 plane and swap left/right joints."""
    M = np.diag([-1.0, 1.0, 1.0])
    rot = M @ m.rotations[:, MIRROR] @ M
    return MotionSequence(rot, m.translation * np.array([-1.0, 1.0, 1.0]), m.fps)
