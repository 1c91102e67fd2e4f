from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..motion import MotionSequence, Skeleton
from .beats import beat_align, detect_kinematic_beats
from .distances import diversity, frechet_distance
from .features import geometric_features, kinetic_features


@dataclass
class MetricReport:
    fid_k: float
    fid_g: float
    dist_k: float
    dist_g: float
    beat_align: float
    n_generated: int
    n_reference: int
    n_beat_scored: int

    def as_dict(self) -> dict:
        return asdict(self)


def sequence_beat_scores(motions: Sequence[MotionSequence], music_beats: Sequence, s: Skeleton) -> list[float]:
    """Per-sequence alignment; sequences with no kinematic or music beats are skipped."""
    scores = []
    for m, mb in zip(motions, music_beats):
        kin = detect_kinematic_beats(m, s)
        mb = np.asarray(mb)
        if kin.size and mb.size:
            scores.append(beat_align(kin, mb))
    return scores


def evaluate_sets(
    generated: Sequence[MotionSequence],
    reference: Sequence[MotionSequence],
    music_beats: Sequence,
    s: Skeleton,
) -> MetricReport:
    """FID and diversity in kinetic/geometric space plus mean beat alignment.

    ``music_beats[i]`` holds beat frames in the timeline of ``generated[i]``.
    """
    gk = np.stack([kinetic_features(m, s) for m in generated])
    rk = np.stack([kinetic_features(m, s) for m in reference])
    gg = np.stack([geometric_features(m, s) for m in generated])
    rg = np.stack([geometric_features(m, s) for m in reference])
    scores = sequence_beat_scores(generated, music_beats, s)
    return MetricReport(
        fid_k=frechet_distance(gk, rk),
        fid_g=frechet_distance(gg, rg),
        dist_k=diversity(gk),
        dist_g=diversity(gg),
        beat_align=float(np.mean(scores)) if scores else float("nan"),
        n_generated=len(generated),
        n_reference=len(reference),
        n_beat_scored=len(scores),
    )


def digest(arrays: Sequence[np.ndarray]) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def write_report(path: str | Path, report: MetricReport, generated_digest: str, reference_digest: str) -> None:
    """One JSON record per metric."""
    with open(path, "w") as f:
        for name in ("fid_k", "fid_g", "dist_k", "dist_g", "beat_align"):
            rec = {
                "metric": name,
                "value": getattr(report, name),
                "n_generated": report.n_generated,
                "n_reference": report.n_reference,
                "generated_digest": generated_digest,
                "reference_digest": reference_digest,
            }
            if name == "beat_align":
                rec["n_scored"] = report.n_beat_scored
            f.write(json.dumps(rec) + "\n")
