"""Command-line entry point: ``fact-dance <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
divergence during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import audiofeat
from .audiofeat import InsufficientAudioError
from .autoregress import CoverageError, GenerationRequest, generate
from .fact import ConfigError, FactConfig
from .metrics import MetricInputError, digest, evaluate_sets, write_report
from .motion import DegenerateRotationError, InsufficientFramesError, MotionSequence, load_skeleton
from .numerics import DimensionError, FormatError, NonFiniteError, TrainingDivergenceError, read_tensor, write_tensor
from .harness.ablate import check_orderings, format_table, run_ablation
from .harness.checkpoint import load_checkpoint, save_checkpoint
from .harness.config import effective_config_text, load_run_config
from .harness.corpus import CorpusSpec, build_corpus, read_corpus, write_corpus
from .harness.split import DatasetIndex, split_dataset
from .harness.training import collect_windows, fit_norm, train_model
from .harness.windows import DataError, WindowSpec

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4

DATA_ERRORS = (
    DataError, FormatError, DimensionError, NonFiniteError, CoverageError, InsufficientAudioError,
    InsufficientFramesError, DegenerateRotationError, MetricInputError, OSError,
)

log = logging.getLogger("fact_dance")


def _overrides(pairs: list[str] | None) -> dict[str, str]:
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise ConfigError(f"--set expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_extract_features(a) -> int:
    if a.sr != audiofeat.SAMPLE_RATE:
        raise ConfigError(f"the feature pipeline analyses at {audiofeat.SAMPLE_RATE} Hz; --sr {a.sr} is not supported")
    clip = audiofeat.read_wav(a.input)
    feats = audiofeat.extract_music_features(clip)
    write_tensor(a.output, feats.astype(np.float32) if a.float32 else feats)
    print(f"{a.output}: {feats.shape[0]} frames x {feats.shape[1]} channels")
    return EXIT_OK


def cmd_make_windows(a) -> int:
    run = load_run_config(a.config, _overrides(a.set))
    corpus = read_corpus(a.data)
    seqs = corpus.subset(a.split) if a.split != "all" else corpus.sequences
    if not seqs:
        raise DataError(f"no sequences in split {a.split!r}")
    ws = collect_windows(seqs, WindowSpec.from_config(run.model, a.stride or run.train.stride))
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds, musics, targets = ws.stacked()
    write_tensor(out / "seeds.ftns", seeds)
    write_tensor(out / "musics.ftns", musics)
    write_tensor(out / "targets.ftns", targets)
    print(f"{len(ws)} windows written to {out}")
    return EXIT_OK


def cmd_split(a) -> int:
    try:
        index = DatasetIndex.from_text(Path(a.index).read_text())
    except OSError as e:
        raise DataError(f"cannot read index: {e}") from None
    out = split_dataset(index, seed=a.seed, test_fraction=a.test_fraction)
    Path(a.out).write_text(out.to_text())
    n_test = sum(1 for v in out.split.values() if v == "test")
    print(f"{len(out.entries) - n_test} train / {n_test} test entries written to {a.out}")
    return EXIT_OK


def cmd_synth(a) -> int:
    spec = CorpusSpec(
        n_choreographies=a.choreographies, musics_per_choreography=a.musics_per_choreography,
        duration=a.duration, noise=a.noise, seed=a.seed, test_fraction=a.test_fraction,
    )
    corpus, clips = build_corpus(spec, keep_audio=True)
    path = write_corpus(corpus, a.out, clips if a.wav else None)
    print(f"{len(corpus.sequences)} sequences; index at {path}")
    return EXIT_OK


def cmd_train(a) -> int:
    run = load_run_config(a.config, _overrides(a.set))
    corpus = read_corpus(a.data)
    train = corpus.subset("train") if corpus.index.split else corpus.sequences
    if not train:
        raise DataError("dataset has no training sequences")
    windows = collect_windows(train, WindowSpec.from_config(run.model, run.train.stride))
    norm = fit_norm(train) if run.train.normalize else None
    result = train_model(run.model, run.train, windows, norm)
    out = save_checkpoint(a.out, result.params, result.state, result.norm)
    (out / "effective_config.txt").write_text(effective_config_text(run))
    (out / "losses.txt").write_text("".join(f"{x!r}\n" for x in result.losses))
    print(f"trained {run.train.steps} steps on {len(windows)} windows; "
          f"{result.params.num_parameters()} parameters; checkpoint at {out}")
    return EXIT_OK


def cmd_generate(a) -> int:
    if a.frames < 1:
        raise ConfigError("--frames must be >= 1")
    params, _, norm = load_checkpoint(a.ckpt)
    cfg = params.config
    seed = read_tensor(a.seed)
    music = read_tensor(a.music)
    if seed.ndim != 2 or len(seed) < cfg.seed_frames:
        raise DataError(f"seed motion must have at least {cfg.seed_frames} frames, got shape {seed.shape}")
    if len(seed) > cfg.seed_frames:
        log.warning("seed has %d frames; using the first %d", len(seed), cfg.seed_frames)
    req = GenerationRequest(seed[: cfg.seed_frames].astype(np.float64), music.astype(np.float64), a.frames)
    motion = generate(params, req, norm)
    write_tensor(a.out, motion.to_features())
    print(f"{a.frames} frames written to {a.out}")
    return EXIT_OK


def _load_dir(path) -> dict[str, np.ndarray]:
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"{root} is not a directory")
    files = sorted(root.glob("*.ftns"))
    if not files:
        raise DataError(f"no .ftns files in {root}")
    return {f.stem: read_tensor(f) for f in files}


def _as_beats(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 1:
        return np.round(arr).astype(int)
    if arr.ndim == 2 and arr.shape[1] == audiofeat.AUDIO_DIM:
        return audiofeat.beat_frames(arr)
    raise DataError(f"music beats must be a 1-D frame list or (L, 35) features, got shape {arr.shape}")


def cmd_evaluate(a) -> int:
    gen = _load_dir(a.generated)
    ref = _load_dir(a.reference)
    beats = _load_dir(a.music_beats)
    missing = sorted(set(gen) - set(beats))
    if missing:
        raise DataError(f"no music beats for generated sequences {missing}")
    names = sorted(gen)
    gm = [MotionSequence.from_features(gen[n]) for n in names]
    rm = [MotionSequence.from_features(ref[n]) for n in sorted(ref)]
    report = evaluate_sets(gm, rm, [_as_beats(beats[n]) for n in names], load_skeleton())
    write_report(a.report, report, digest([gen[n] for n in names]), digest([ref[n] for n in sorted(ref)]))
    print(json.dumps(report.as_dict()))
    return EXIT_OK


def cmd_ablate(a) -> int:
    run = load_run_config(a.config, _overrides(a.set))
    corpus = read_corpus(a.data)
    names = a.variants.split(",") if a.variants else None
    try:
        results = run_ablation(corpus, run.model, run.train, a.horizon, names)
    except ValueError as e:
        if isinstance(e, DATA_ERRORS):
            raise
        raise ConfigError(str(e)) from None
    table = format_table(results)
    checks = check_orderings(results, run.model.future_n)
    lines = [table, ""] + [f"{'PASS' if ok else 'FAIL'}  {label}  ({x:.4g} vs {y:.4g})" for label, ok, x, y in checks]
    text = "\n".join(lines) + "\n"
    if a.out:
        out = Path(a.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.txt").write_text(text)
        (out / "effective_config.txt").write_text(effective_config_text(run))
        with open(out / "results.jsonl", "w") as f:
            for r in results.values():
                rec = {"variant": r.name, **r.evaluation.report.as_dict(),
                       "beat_align_repaired": r.evaluation.beat_align_repaired,
                       "freeze_min": r.evaluation.freeze_min, "freeze_median": r.evaluation.freeze_median,
                       "poses_valid": r.evaluation.poses_valid,
                       "final_loss": r.final_loss, "train_seconds": r.train_seconds,
                       "config": r.config.to_dict()}
                f.write(json.dumps(rec) + "\n")
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fact-dance", description="Music-conditioned dance generation (FACT) at desk scale.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("extract-features", help="WAV -> (frames, 35) music features")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--sr", type=int, default=audiofeat.SAMPLE_RATE, help="analysis sample rate")
    s.add_argument("--float32", action="store_true", help="store features as float32")
    s.set_defaults(fn=cmd_extract_features)

    def config_args(s):
        s.add_argument("--config", help="key=value run config file")
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    s = sub.add_parser("make-windows", help="cut (seed, music, target) training windows")
    s.add_argument("--data", required=True, help="dataset index.tsv or its directory")
    s.add_argument("--out", required=True)
    s.add_argument("--split", default="train", choices=("train", "test", "all"))
    s.add_argument("--stride", type=int)
    config_args(s)
    s.set_defaults(fn=cmd_make_windows)

    s = sub.add_parser("split", help="leakage-free train/test assignment of an index")
    s.add_argument("--index", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.set_defaults(fn=cmd_split)

    s = sub.add_parser("synth", help="write a split synthetic music/dance corpus")
    s.add_argument("--out", required=True)
    d = CorpusSpec()
    s.add_argument("--choreographies", type=int, default=d.n_choreographies)
    s.add_argument("--musics-per-choreography", type=int, default=d.musics_per_choreography)
    s.add_argument("--duration", type=float, default=d.duration)
    s.add_argument("--noise", type=float, default=d.noise)
    s.add_argument("--seed", type=int, default=d.seed)
    s.add_argument("--test-fraction", type=float, default=d.test_fraction)
    s.add_argument("--wav", action="store_true", help="also write the audio")
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("train", help="train a model on the train split")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="checkpoint directory")
    config_args(s)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("generate", help="autoregressive generation from a seed and music")
    s.add_argument("--ckpt", required=True, help="checkpoint directory or its manifest.txt")
    s.add_argument("--seed", required=True, help="seed motion features (.ftns)")
    s.add_argument("--music", required=True, help="music features (.ftns), frame 0 aligned with the seed")
    s.add_argument("--frames", type=int, default=1200)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_generate)

    s = sub.add_parser("evaluate", help="FID/Dist/BeatAlign of generated vs reference motion")
    s.add_argument("--generated", required=True)
    s.add_argument("--reference", required=True)
    s.add_argument("--music-beats", required=True)
    s.add_argument("--report", required=True, help="output JSON-lines file")
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("ablate", help="train and compare the attention/supervision/fusion variants")
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.add_argument("--horizon", type=int, default=1200)
    s.add_argument("--variants", help="comma-separated subset of the grid")
    config_args(s)
    s.set_defaults(fn=cmd_ablate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return a.fn(a)
    except TrainingDivergenceError as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
