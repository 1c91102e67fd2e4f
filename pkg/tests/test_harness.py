import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fact_dance.audiofeat import FPS
from fact_dance.fact import ConfigError, FeatureNorm, desk_config, init_model, tiny_config
from fact_dance.metrics import detect_kinematic_beats, geometric_features
from fact_dance.motion import load_skeleton
from fact_dance.numerics import AdamState
from fact_dance.harness.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from fact_dance.harness.config import (
    DESK_SCHEDULE,
    build_run_config,
    effective_config_text,
    load_run_config,
    parse_config_text,
    parse_schedule,
)
from fact_dance.harness.split import DatasetIndex, IndexEntry, SplitInfeasibleError, leakage, split_dataset
from fact_dance.harness.synth import SyntheticSpec, synthesize_dataset
from fact_dance.harness.corpus import Sequence
from fact_dance.harness.training import batch_order, collect_windows
from fact_dance.harness.windows import EmptyDatasetError, WindowSpec, make_windows, window_starts

SK = load_skeleton()


# ---- windows --------------------------------------------------------------------------------


def test_window_count_example():
    spec = WindowSpec(120, 240, 20, stride=1)
    starts = window_starts(200, 400, spec)
    np.testing.assert_array_equal(starts, np.arange(61))


def test_exact_length_gives_one_window_and_short_gives_error():
    spec = WindowSpec(4, 6, 2, stride=3)
    seeds, musics, targets = make_windows(np.zeros((6, 219)), np.zeros((6, 35)), spec)
    assert seeds.shape == (1, 4, 219) and musics.shape == (1, 6, 35) and targets.shape == (1, 2, 219)
    with pytest.raises(EmptyDatasetError, match="need 6"):
        make_windows(np.zeros((5, 219)), np.zeros((6, 35)), spec)


def test_window_spec_invariants():
    for bad in ((10, 5, 1, 1), (4, 6, 0, 1), (4, 6, 1, 0), (0, 6, 1, 1)):
        with pytest.raises(ValueError):
            WindowSpec(*bad)


@settings(max_examples=60, deadline=None)
@given(
    T=st.integers(1, 8), extra=st.integers(0, 6), N=st.integers(1, 5), stride=st.integers(1, 4),
    Lm=st.integers(1, 40), La=st.integers(1, 40),
)
def test_windows_are_exact_slices(T, extra, N, stride, Lm, La):
    spec = WindowSpec(T, T + extra, N, stride)
    motion = np.arange(Lm, dtype=float)[:, None] * np.ones((1, 219))
    audio = 1000 + np.arange(La, dtype=float)[:, None] * np.ones((1, 35))
    starts = window_starts(Lm, La, spec)
    if len(starts) == 0:
        with pytest.raises(EmptyDatasetError):
            make_windows(motion, audio, spec)
        return
    seeds, musics, targets = make_windows(motion, audio, spec)
    assert np.all(starts % stride == 0) and starts[0] == 0
    assert starts[-1] + T + N <= Lm and starts[-1] + T + extra <= La
    assert starts[-1] + stride + T + N > Lm or starts[-1] + stride + T + extra > La
    for k, f in enumerate(starts):
        np.testing.assert_array_equal(seeds[k, :, 0], np.arange(f, f + T))
        np.testing.assert_array_equal(targets[k, :, 0], np.arange(f + T, f + T + N))
        np.testing.assert_array_equal(musics[k, :, 0], 1000 + np.arange(f, f + T + extra))


def test_window_set_matches_make_windows():
    rng = np.random.default_rng(0)
    spec = WindowSpec(5, 8, 3, stride=4)
    seqs = [Sequence(f"s{i}", rng.normal(size=(n, 219)), rng.normal(size=(n + 2, 35)), f"c{i}", f"m{i}", "mid")
            for i, n in enumerate((30, 6, 17))]
    ws = collect_windows(seqs, spec)  # the 6-frame sequence has no window
    expect = [make_windows(s.motion, s.music, spec) for s in (seqs[0], seqs[2])]
    for got, parts in zip(ws.stacked(), zip(*expect)):
        np.testing.assert_array_equal(got, np.concatenate(parts))
    doubled = ws.mapped(lambda m: 2 * m, lambda a: a)
    np.testing.assert_array_equal(doubled.gather([3])[2], 2 * ws.gather([3])[2])


# ---- split ----------------------------------------------------------------------------------


def grid(pairs):
    return DatasetIndex([IndexEntry(f"{c}_{m}.m", f"{c}_{m}.a", c, m) for c, m in pairs])


def test_disjoint_grid_meets_the_fraction():
    idx = grid([(f"c{i}", f"m{i}") for i in range(10)])
    out = split_dataset(idx, seed=1, test_fraction=0.3)
    assert len(out.subset("test")) == 3 and len(out.subset("train")) == 7
    assert not leakage(out)
    assert split_dataset(idx, seed=1, test_fraction=0.3).split == out.split


def test_shared_music_is_infeasible():
    with pytest.raises(SplitInfeasibleError):
        split_dataset(grid([(f"c{i}", "m0") for i in range(5)]))
    full = grid(list(itertools.product(["c0", "c1", "c2"], [f"m{k}" for k in range(6)])))
    with pytest.raises(SplitInfeasibleError):
        split_dataset(full)


def test_choreography_with_six_musics_stays_together():
    pairs = [("cA", f"a{k}") for k in range(6)] + [(f"c{i}", f"m{i}") for i in range(8)]
    out = split_dataset(grid(pairs), seed=3, test_fraction=0.4)
    sides = {out.split[i] for i, e in enumerate(out.entries) if e.choreography == "cA"}
    assert len(sides) == 1
    assert not leakage(out)


def test_index_text_roundtrip():
    idx = split_dataset(grid([(f"c{i}", f"m{i}") for i in range(4)]), test_fraction=0.5)
    back = DatasetIndex.from_text(idx.to_text())
    assert back.entries == idx.entries and back.split == idx.split


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=2, max_size=30, unique=True),
    st.integers(0, 5),
    st.floats(0.05, 0.9),
)
def test_split_never_leaks(pairs, seed, frac):
    idx = grid([(f"c{c}", f"m{m}") for c, m in pairs])
    try:
        out = split_dataset(idx, seed=seed, test_fraction=frac)
    except SplitInfeasibleError:
        return
    assert not leakage(out)
    assert out.subset("train") and out.subset("test")
    assert len(out.split) == len(pairs)


# ---- synthetic data -------------------------------------------------------------------------


def test_synthetic_beats_count_and_recovery():
    pair = synthesize_dataset(SyntheticSpec(bpm=120, duration=20))
    assert len(pair.beat_frames) == 40
    kin = detect_kinematic_beats(pair.motion, SK)
    hit = np.abs(pair.beat_frames[:, None] - kin[None, :]).min(axis=1) <= 3
    assert hit.mean() >= 0.9


def test_synthetic_patterns_differ_and_are_deterministic():
    a = synthesize_dataset(SyntheticSpec(pattern_id=1, duration=6))
    b = synthesize_dataset(SyntheticSpec(pattern_id=2, duration=6))
    assert np.any(geometric_features(a.motion, SK) != geometric_features(b.motion, SK))
    again = synthesize_dataset(SyntheticSpec(pattern_id=1, duration=6))
    assert again.motion.to_features().tobytes() == a.motion.to_features().tobytes()
    assert again.clip.samples.tobytes() == a.clip.samples.tobytes()
    assert len(a.motion) == 6 * FPS


def test_synthetic_spec_bounds():
    with pytest.raises(ValueError):
        SyntheticSpec(bpm=200)
    with pytest.raises(ValueError):
        SyntheticSpec(duration=0)


# ---- configuration --------------------------------------------------------------------------


def test_config_text_and_overrides(tmp_path):
    text = "preset = tiny\n# comment\nhidden = 32   # wider\nsteps=7\nlr_schedule=0:1e-3,10:1e-4\nnormalize=false\n"
    assert parse_config_text(text)["hidden"] == "32"
    path = tmp_path / "run.cfg"
    path.write_text(text)
    run = load_run_config(path, {"heads": "4"})
    assert run.preset == "tiny"
    assert (run.model.hidden, run.model.heads, run.model.seed_frames) == (32, 4, 6)
    assert run.train.steps == 7 and run.train.lr_schedule == ((0, 1e-3), (10, 1e-4)) and not run.train.normalize
    again = build_run_config(parse_config_text(effective_config_text(run)))
    assert again == run


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown config key"):
        build_run_config({"hiden": "3"})
    with pytest.raises(ConfigError, match="preset"):
        build_run_config({"preset": "huge"})
    with pytest.raises(ConfigError):
        build_run_config({"steps": "many"})
    with pytest.raises(ConfigError, match="divisible"):
        build_run_config({"hidden": "801", "heads": "10"})
    with pytest.raises(ConfigError):
        parse_schedule("0-1e-3")
    with pytest.raises(ConfigError):
        build_run_config({"lr_schedule": "0:1e-3,10:1e-2"})
    with pytest.raises(ConfigError):
        parse_config_text("just words")


def test_effective_config_lists_every_default():
    text = effective_config_text(build_run_config({}))
    keys = set(parse_config_text(text))
    assert {"preset", "hidden", "mask_mode", "predict_offset", "stride", "lr_schedule", "normalize"} <= keys
    assert parse_schedule(parse_config_text(text)["lr_schedule"]) == DESK_SCHEDULE


def test_batch_order_covers_each_epoch():
    order = batch_order(10, 4, 6, seed=0)
    assert order.shape == (6, 4)
    flat = order.reshape(-1)
    assert sorted(flat[:10]) == list(range(10))
    np.testing.assert_array_equal(batch_order(10, 4, 6, seed=0), order)


# ---- checkpoints ----------------------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    cfg = tiny_config()
    params = init_model(cfg, seed=2)
    rng = np.random.default_rng(0)
    state = AdamState(step=17, schedule=((0, 1e-3), (5, 1e-4)))
    state.m = {k: rng.normal(size=t.shape) for k, t in params.tensors.items()}
    state.v = {k: rng.uniform(size=t.shape) for k, t in params.tensors.items()}
    norm = FeatureNorm.fit([rng.normal(size=(30, 219))], [rng.normal(size=(30, 35))])
    save_checkpoint(tmp_path / "ck", params, state, norm)
    p2, s2, n2 = load_checkpoint(tmp_path / "ck" / "manifest.txt")
    assert p2.config == cfg
    for k in params.tensors:
        assert p2[k].data.tobytes() == params[k].data.tobytes()
        assert s2.m[k].tobytes() == state.m[k].tobytes() and s2.v[k].tobytes() == state.v[k].tobytes()
    assert s2.step == 17 and s2.schedule == state.schedule
    assert n2.motion_std.tobytes() == norm.motion_std.tobytes()


def test_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path)
    params = init_model(tiny_config())
    root = save_checkpoint(tmp_path / "ck", params)
    (root / "params" / "head.b.ftns").unlink()
    with pytest.raises(CheckpointError, match="missing"):
        load_checkpoint(root)
    root = save_checkpoint(tmp_path / "ck2", params)
    text = (root / "manifest.txt").read_text().replace("config.hidden=16", "config.hidden=32")
    (root / "manifest.txt").write_text(text)
    with pytest.raises(CheckpointError):
        load_checkpoint(root)


def test_desk_preset_matches_the_model_defaults():
    assert build_run_config({}).model == desk_config()
