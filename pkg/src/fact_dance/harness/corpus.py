"""Synthetic stand-in for a paired music/dance corpus.

Each choreography (a motion pattern id) is danced to a few musics of its
own, so choreographies and musics form small connected groups that the
splitter can place whole. Music tempo sets the genre tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..audiofeat import beat_frames, extract_music_features, write_wav
from ..numerics import read_tensor, write_tensor
from .split import DatasetIndex, IndexEntry, split_dataset
from .synth import SyntheticSpec, synthesize_dataset
from .windows import DataError

GENRES = ((0.0, 95.0, "slow"), (95.0, 120.0, "mid"), (120.0, 181.0, "fast"))


def genre_of(bpm: float) -> str:
    for lo, hi, name in GENRES:
        if lo <= bpm < hi:
            return name
    raise ValueError(f"bpm {bpm} outside every genre band")


@dataclass(frozen=True)
class CorpusSpec:
    n_choreographies: int = 240
    musics_per_choreography: int = 1
    duration: float = 22.0
    bpm_range: tuple[float, float] = (80.0, 140.0)
    noise: float = 0.0
    seed: int = 0
    test_fraction: float = 40 / 240  # 40 held-out sequences


@dataclass
class Sequence:
    name: str
    motion: np.ndarray  # (T, 219)
    music: np.ndarray  # (L, 35)
    choreography: str
    music_id: str
    genre: str

    @property
    def music_beats(self) -> np.ndarray:
        return beat_frames(self.music)


@dataclass
class Corpus:
    index: DatasetIndex
    sequences: list[Sequence]

    def subset(self, name: str) -> list[Sequence]:
        return [s for i, s in enumerate(self.sequences) if self.index.split.get(i) == name]


def build_corpus(spec: CorpusSpec = CorpusSpec(), keep_audio: bool = False):
    """Synthesise, featurise and split; returns the corpus (and clips if asked)."""
    rng = np.random.default_rng([spec.seed, 11])
    entries, seqs, clips = [], [], []
    for c in range(spec.n_choreographies):
        for k in range(spec.musics_per_choreography):
            music_id = c * spec.musics_per_choreography + k
            bpm = float(np.round(rng.uniform(*spec.bpm_range), 1))
            pair = synthesize_dataset(SyntheticSpec(
                bpm=bpm, duration=spec.duration, pattern_id=1000 * spec.seed + c,
                noise=spec.noise, seed=music_id + 7919 * spec.seed, music_seed=music_id + 7919 * spec.seed,
            ))
            name = f"c{c:03d}_m{music_id:03d}"
            feats = extract_music_features(pair.clip)
            motion = pair.motion.to_features()
            n = min(len(motion), len(feats))
            seqs.append(Sequence(name, motion[:n], feats[:n], f"c{c:03d}", f"m{music_id:03d}", genre_of(bpm)))
            entries.append(IndexEntry(f"motion/{name}.ftns", f"music/{name}.ftns", f"c{c:03d}", f"m{music_id:03d}", genre_of(bpm)))
            clips.append(pair.clip)
    index = split_dataset(DatasetIndex(entries), seed=spec.seed, test_fraction=spec.test_fraction)
    corpus = Corpus(index, seqs)
    return (corpus, clips) if keep_audio else corpus


def write_corpus(corpus: Corpus, root, clips=None) -> Path:
    root = Path(root)
    for seq, entry in zip(corpus.sequences, corpus.index.entries):
        write_tensor(_mk(root / entry.motion_file), seq.motion)
        write_tensor(_mk(root / entry.music_file), seq.music)
    if clips is not None:
        for seq, clip in zip(corpus.sequences, clips):
            write_wav(_mk(root / "wav" / f"{seq.name}.wav"), clip)
    (root / "index.tsv").write_text(corpus.index.to_text())
    return root / "index.tsv"


def _mk(p: Path) -> Path:
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def read_corpus(index_path) -> Corpus:
    index_path = Path(index_path)
    if index_path.is_dir():
        index_path = index_path / "index.tsv"
    try:
        index = DatasetIndex.from_text(index_path.read_text())
    except OSError as e:
        raise DataError(f"cannot read dataset index {index_path}: {e}") from None
    root = index_path.parent
    seqs = []
    for e in index.entries:
        try:
            motion = read_tensor(root / e.motion_file)
            music = read_tensor(root / e.music_file)
        except OSError as err:
            raise DataError(f"cannot read dataset file: {err}") from None
        if motion.ndim != 2 or motion.shape[1] != 219:
            raise DataError(f"{e.motion_file}: expected (T, 219) motion features, got {motion.shape}")
        if music.ndim != 2 or music.shape[1] != 35:
            raise DataError(f"{e.music_file}: expected (L, 35) music features, got {music.shape}")
        seqs.append(Sequence(Path(e.motion_file).stem, motion, music, e.choreography, e.music, e.genre))
    return Corpus(index, seqs)
