"""Kinetic (72-dim) and geometric (33-dim) motion descriptors."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from ..motion import MotionSequence, Skeleton, joint_velocities, sequence_positions


def kinetic_features(m: MotionSequence, s: Skeleton) -> np.ndarray:
    """Per-joint, per-axis mean squared velocity, flattened to 72 values."""
    v = joint_velocities(m, s)
    return (v**2).mean(axis=0).reshape(-1)


@dataclass(frozen=True)
class Relation:
    name: str
    kind: str
    joints: tuple[int, ...]
    side: int
    threshold: float


_ARITY = {"above": 2, "front": 2, "near": 2, "far": 2, "outward": 2, "bent": 3}


@lru_cache(maxsize=1)
def relation_catalog() -> tuple[Relation, ...]:
    text = resources.files("fact_dance.data").joinpath("geometric_relations.txt").read_text()
    rels = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, kind, *rest = line.split()
        n = _ARITY[kind]
        joints = tuple(int(x) for x in rest[:n])
        side = int(rest[n]) if kind == "outward" else 0
        rels.append(Relation(name, kind, joints, side, float(rest[-1])))
    return tuple(rels)


def relation_bits(pos: np.ndarray) -> np.ndarray:
    """Evaluate every catalog predicate on positions (T, 24, 3) -> (T, 33) booleans."""
    up = np.array([0.0, 1.0, 0.0])
    lateral = pos[:, 1] - pos[:, 2]
    lateral /= np.linalg.norm(lateral, axis=-1, keepdims=True)
    forward = np.cross(lateral, up)
    forward /= np.linalg.norm(forward, axis=-1, keepdims=True)
    cols = []
    for r in relation_catalog():
        a = pos[:, r.joints[0]]
        b = pos[:, r.joints[1]]
        d = a - b
        if r.kind == "above":
            bit = d @ up > r.threshold
        elif r.kind == "front":
            bit = (d * forward).sum(-1) > r.threshold
        elif r.kind == "outward":
            bit = (d * lateral).sum(-1) * r.side > r.threshold
        elif r.kind == "near":
            bit = np.linalg.norm(d, axis=-1) < r.threshold
        elif r.kind == "far":
            bit = np.linalg.norm(d, axis=-1) > r.threshold
        else:
            c = pos[:, r.joints[2]]
            u, w = a - b, c - b
            cos = (u * w).sum(-1) / (np.linalg.norm(u, axis=-1) * np.linalg.norm(w, axis=-1))
            bit = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))) < r.threshold
        cols.append(bit)
    return np.stack(cols, axis=1)


def geometric_features(m: MotionSequence, s: Skeleton) -> np.ndarray:
    """Fraction of frames in which each of the 33 relations holds."""
    return relation_bits(sequence_positions(m, s)).mean(axis=0)
