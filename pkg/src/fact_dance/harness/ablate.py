"""Held-out generation, scoring and the attention/supervision/fusion ablation grid."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from ..autoregress import freeze_diagnostic, generate_batch
from ..fact import FactConfig, FactParams, FeatureNorm, ablation_variants
from ..metrics import MetricReport, evaluate_sets, sequence_beat_scores
from ..motion import MotionSequence, Skeleton, load_skeleton
from .config import TrainSettings
from .corpus import Corpus, Sequence
from .training import collect_windows, fit_norm, train_model
from .windows import DataError, WindowSpec

log = logging.getLogger(__name__)

GEN_BATCH = 40


@dataclass
class TestSet:
    """Seeds, music windows and references cut from held-out sequences."""

    names: list[str]
    seeds: np.ndarray  # (S, T, 219)
    musics: np.ndarray  # (S, T' + horizon - 1, 35)
    references: list[MotionSequence]  # the real continuations, horizon frames each
    music_beats: list[np.ndarray]  # beat frames in the generated timeline
    horizon: int


def make_test_set(seqs: list[Sequence], cfg: FactConfig, horizon: int) -> TestSet:
    """Seed with the first T real frames; generated frame k sits at sequence frame T + k."""
    T = cfg.seed_frames
    need_music = cfg.music_frames + horizon - 1
    names, seeds, musics, refs, beats = [], [], [], [], []
    for s in seqs:
        if len(s.music) < need_music or len(s.motion) < T + horizon:
            log.warning("held-out sequence %s too short for horizon %d; skipped", s.name, horizon)
            continue
        names.append(s.name)
        seeds.append(s.motion[:T])
        musics.append(s.music[:need_music])
        refs.append(MotionSequence.from_features(s.motion[T : T + horizon]))
        b = s.music_beats
        beats.append(b[(b >= T) & (b < T + horizon)] - T)
    if not names:
        raise DataError(f"no held-out sequence covers a {horizon}-frame horizon")
    return TestSet(names, np.stack(seeds), np.stack(musics), refs, beats, horizon)


def generate_test_set(params: FactParams, norm: FeatureNorm | None, test: TestSet) -> list[MotionSequence]:
    out = []
    for i in range(0, len(test.names), GEN_BATCH):
        sl = slice(i, i + GEN_BATCH)
        frames = generate_batch(params, test.seeds[sl], test.musics[sl], test.horizon, norm=norm)
        out += [MotionSequence.from_features(f, orthonormal=False) for f in frames]
    return out


def repairing(n: int, seed: int = 0) -> np.ndarray:
    """A random derangement: every motion gets some other sequence's music."""
    if n < 2:
        raise DataError("random re-pairing needs at least two sequences")
    rng = np.random.default_rng([seed, 23])
    while True:
        p = rng.permutation(n)
        if not np.any(p == np.arange(n)):
            return p


@dataclass
class Evaluation:
    report: MetricReport
    freeze: np.ndarray  # per sequence, smallest 2-s mean joint displacement
    beat_align_repaired: float
    poses_valid: bool = True  # every generated frame passes the PoseFrame invariants
    frames: int = 0  # shortest generated sequence

    @property
    def freeze_min(self) -> float:
        return float(self.freeze.min())

    @property
    def freeze_median(self) -> float:
        return float(np.median(self.freeze))


def evaluate_generation(generated: list[MotionSequence], test: TestSet, skeleton: Skeleton, seed: int = 0) -> Evaluation:
    report = evaluate_sets(generated, test.references, test.music_beats, skeleton)
    freeze = np.array([freeze_diagnostic(m, skeleton) for m in generated])
    perm = repairing(len(generated), seed)
    shuffled = sequence_beat_scores(generated, [test.music_beats[j] for j in perm], skeleton)
    valid = all(m.is_valid() for m in generated)
    frames = min(len(m) for m in generated)
    return Evaluation(report, freeze, float(np.mean(shuffled)) if shuffled else float("nan"), valid, frames)


@dataclass
class VariantResult:
    name: str
    config: FactConfig
    evaluation: Evaluation
    final_loss: float
    train_seconds: float
    generate_seconds: float
    params: FactParams | None = None


# Orderings the grid is expected to show, as (label, left, relation, right, metric).
ORDERINGS = (
    ("freeze: future-N >= causal shift-1", "full_f{N}", ">=", "causal_shift1", "freeze_min"),
    ("FID_k: future-N <= causal shift-1", "full_f{N}", "<=", "causal_shift1", "fid_k"),
    ("BeatAlign: early >= late", "full_f{N}", ">=", "late_fusion", "beat_align"),
    ("BeatAlign: late >= none", "late_fusion", ">=", "no_fusion", "beat_align"),
)


def metric_value(r: VariantResult, metric: str) -> float:
    if metric == "freeze_min":
        return r.evaluation.freeze_min
    return float(getattr(r.evaluation.report, metric))


def check_orderings(results: dict[str, VariantResult], future_n: int) -> list[tuple[str, bool, float, float]]:
    out = []
    for label, left, rel, right, metric in ORDERINGS:
        left = left.format(N=future_n)
        if left not in results or right not in results:
            continue
        a, b = metric_value(results[left], metric), metric_value(results[right], metric)
        ok = a >= b if rel == ">=" else a <= b
        out.append((label, bool(ok), a, b))
    return out


def run_ablation(
    corpus: Corpus,
    base: FactConfig,
    settings: TrainSettings,
    horizon: int,
    names: list[str] | None = None,
    skeleton: Skeleton | None = None,
) -> dict[str, VariantResult]:
    """Train and score every variant on the corpus train/test split."""
    skeleton = skeleton or load_skeleton()
    variants = ablation_variants(base)
    names = names or list(variants)
    unknown = [n for n in names if n not in variants]
    if unknown:
        raise ValueError(f"unknown ablation variants {unknown}; choose from {list(variants)}")
    train, held = corpus.subset("train"), corpus.subset("test")
    if not train or not held:
        raise DataError("the corpus needs both train and test sequences")
    norm = fit_norm(train) if settings.normalize else None
    results = {}
    for name in names:
        cfg = variants[name]
        windows = collect_windows(train, WindowSpec.from_config(cfg, settings.stride))
        t0 = time.perf_counter()
        trained = train_model(cfg, settings, windows, norm)
        t1 = time.perf_counter()
        test = make_test_set(held, cfg, horizon)
        generated = generate_test_set(trained.params, norm, test)
        t2 = time.perf_counter()
        ev = evaluate_generation(generated, test, skeleton, settings.seed)
        last = trained.losses[-min(100, len(trained.losses)):] if trained.losses else [float("nan")]
        results[name] = VariantResult(name, cfg, ev, float(np.mean(last)), t1 - t0, t2 - t1, trained.params)
        log.info("%s: %s freeze_min=%.4g", name, ev.report, ev.freeze_min)
    return results


def format_table(results: dict[str, VariantResult]) -> str:
    head = f"{'variant':<14} {'layers':>8} {'FID_k':>10} {'FID_g':>9} {'Dist_k':>8} {'Dist_g':>8} {'BeatAlign':>9} {'BA(repair)':>10} {'freeze_min':>10} {'loss':>8}"
    rows = [head, "-" * len(head)]
    for r in results.values():
        c, e = r.config, r.evaluation
        rep = e.report
        layers = f"{c.motion_layers}/{c.audio_layers}/{c.cross_layers}"
        rows.append(
            f"{r.name:<14} {layers:>8} {rep.fid_k:>10.4g} {rep.fid_g:>9.4g} {rep.dist_k:>8.4g} {rep.dist_g:>8.4g} "
            f"{rep.beat_align:>9.4f} {e.beat_align_repaired:>10.4f} {e.freeze_min:>10.4g} {r.final_loss:>8.4g}"
        )
    return "\n".join(rows)
