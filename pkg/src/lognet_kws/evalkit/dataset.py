"""Speech Commands indexing and train/test splitting."""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..lognet import DEFAULT_LABELS

SPLIT_MODES = ("random_80_20", "speaker_independent")
SPLIT_ALIASES = {"random": "random_80_20", "speaker-independent": "speaker_independent",
                 "si": "speaker_independent"}
TEST_FRACTION = 0.2
SI_TEST_BUCKETS = 20  # of 100 hash buckets


class DatasetError(ValueError):
    pass


def canonical_split(mode: str) -> str:
    mode = SPLIT_ALIASES.get(mode, mode)
    if mode not in SPLIT_MODES:
        raise ValueError(f"unknown split mode {mode!r}; choose from {SPLIT_MODES}")
    return mode


def fnv1a_32(text: str) -> int:
    h = 0x811C9DC5
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def speaker_of(filename: str) -> str:
    """Speaker id of a ``<speaker>_nohash_<n>.wav`` file name."""
    stem = os.path.basename(filename)
    head, sep, _ = stem.partition("_")
    if not sep or not head:
        raise DatasetError(f"cannot extract a speaker id from {filename!r}")
    return head


def speaker_in_test(speaker: str) -> bool:
    return fnv1a_32(speaker) % 100 < SI_TEST_BUCKETS


@dataclass(frozen=True)
class Entry:
    path: str
    label: str
    speaker: str
    split: str  # "train" | "test"


@dataclass(frozen=True)
class DatasetIndex:
    entries: tuple
    mode: str
    seed: int
    labels: tuple = DEFAULT_LABELS

    def subset(self, split: str) -> list[Entry]:
        return [e for e in self.entries if e.split == split]

    @property
    def train(self) -> list[Entry]:
        return self.subset("train")

    @property
    def test(self) -> list[Entry]:
        return self.subset("test")

    def class_counts(self, split: str | None = None) -> dict:
        rows = self.entries if split is None else self.subset(split)
        counts = Counter(e.label for e in rows)
        return {lab: counts.get(lab, 0) for lab in self.labels}

    def speakers(self, split: str) -> set:
        return {e.speaker for e in self.subset(split)}

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "total": len(self.entries),
            "train": len(self.train),
            "test": len(self.test),
            "class_counts": self.class_counts(),
            "train_counts": self.class_counts("train"),
            "test_counts": self.class_counts("test"),
            "train_speakers": len(self.speakers("train")),
            "test_speakers": len(self.speakers("test")),
        }


def scan_dataset(root, labels=DEFAULT_LABELS) -> list[tuple[str, str, str]]:
    """(path, label, speaker) for every WAV under ``root/<label>/``, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")
    rows = []
    for label in labels:
        folder = root / label
        if not folder.is_dir():
            raise DatasetError(f"dataset root {root} has no '{label}' folder")
        for wav in sorted(folder.glob("*.wav")):
            rows.append((str(wav), label, speaker_of(wav.name)))
    return rows


def build_index(root, mode="speaker_independent", seed=0, labels=DEFAULT_LABELS) -> DatasetIndex:
    """Index the four command folders and assign every file to train or test.

    ``random_80_20`` shuffles all files with ``seed`` and puts the first
    ``round(0.8 n)`` in train. ``speaker_independent`` sends a speaker to test
    when ``FNV-1a(speaker) % 100 < 20``; the seed plays no role there.
    """
    mode = canonical_split(mode)
    rows = scan_dataset(root, labels)
    if not rows:
        raise DatasetError(f"no WAV files found under {root}")
    if mode == "random_80_20":
        order = np.random.default_rng(seed).permutation(len(rows))
        n_train = int(round((1 - TEST_FRACTION) * len(rows)))
        split = np.empty(len(rows), dtype=object)
        split[order[:n_train]] = "train"
        split[order[n_train:]] = "test"
    else:
        split = ["test" if speaker_in_test(spk) else "train" for _, _, spk in rows]
    entries = tuple(Entry(p, lab, spk, s) for (p, lab, spk), s in zip(rows, split))
    return DatasetIndex(entries, mode, int(seed), tuple(labels))
