"""Train/test assignment with no choreography or music shared across splits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .windows import DataError


class SplitInfeasibleError(DataError):
    pass


@dataclass(frozen=True)
class IndexEntry:
    motion_file: str
    music_file: str
    choreography: str
    music: str
    genre: str = ""


@dataclass
class DatasetIndex:
    entries: list[IndexEntry]
    split: dict[int, str] = field(default_factory=dict)  # entry index -> "train" | "test"

    def subset(self, name: str) -> list[IndexEntry]:
        return [e for i, e in enumerate(self.entries) if self.split.get(i) == name]

    def to_text(self) -> str:
        lines = ["# motion_file\tmusic_file\tchoreography\tmusic\tgenre\tsplit"]
        for i, e in enumerate(self.entries):
            lines.append("\t".join([e.motion_file, e.music_file, e.choreography, e.music, e.genre, self.split.get(i, "")]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DatasetIndex":
        entries, split = [], {}
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) not in (4, 5, 6):
                raise DataError(f"index line {n}: expected 4-6 tab-separated columns, got {len(cols)}")
            cols += [""] * (6 - len(cols))
            if cols[5]:
                if cols[5] not in ("train", "test"):
                    raise DataError(f"index line {n}: split must be train or test, got {cols[5]!r}")
                split[len(entries)] = cols[5]
            entries.append(IndexEntry(*cols[:5]))
        return cls(entries, split)


def leakage(index: DatasetIndex) -> set[str]:
    """Choreography and music ids present in both splits (empty when clean)."""
    seen: dict[str, set[str]] = {}
    for i, e in enumerate(index.entries):
        s = index.split.get(i)
        if s is None:
            continue
        seen.setdefault("choreo:" + e.choreography, set()).add(s)
        seen.setdefault("music:" + e.music, set()).add(s)
    return {k for k, v in seen.items() if len(v) > 1}


def _components(entries: list[IndexEntry]) -> list[list[int]]:
    # union-find over ids; every entry ties its choreography to its music
    parent: dict[str, str] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in entries:
        a, b = "c:" + e.choreography, "m:" + e.music
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, list[int]] = {}
    for i, e in enumerate(entries):
        groups.setdefault(find("c:" + e.choreography), []).append(i)
    return [groups[k] for k in sorted(groups)]


def split_dataset(index: DatasetIndex, seed: int = 0, test_fraction: float = 0.2) -> DatasetIndex:
    """Assign whole connected groups of entries to one split.

    Entries sharing a choreography or a music id are connected; each
    connected group goes to a single split, so no id can leak. Groups are
    visited in seeded random order and placed in test until the requested
    fraction of entries is reached, always leaving at least one group for
    training.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    entries = index.entries
    if len({e.music for e in entries}) < 2 or len({e.choreography for e in entries}) < 2:
        raise SplitInfeasibleError("splitting needs at least two distinct music ids and two choreography ids")
    groups = _components(entries)
    if len(groups) < 2:
        raise SplitInfeasibleError(
            "every choreography is linked to every other through shared music; no leakage-free split exists"
        )
    order = np.random.default_rng(seed).permutation(len(groups))
    want = test_fraction * len(entries)
    placed = []
    n_test = 0
    for g in order:
        to_test = n_test == 0 or n_test + len(groups[g]) <= want
        placed.append((g, to_test))
        n_test += len(groups[g]) if to_test else 0
    if all(t for _, t in placed):
        placed[-1] = (placed[-1][0], False)
    split = {i: ("test" if t else "train") for g, t in placed for i in groups[g]}
    out = DatasetIndex(list(entries), split)
    leaks = leakage(out)
    if leaks:  # cannot happen by construction; guard against edits
        raise SplitInfeasibleError(f"split leaks ids: {sorted(leaks)}")
    return out
