"""Corpus manifest handling, narrow-band filtering and deterministic batching.

Manifest CSV schema: header ``id,wav_path,label,split`` with labels in
{positive, negative, unknown} (unknown only on the blind test split) and
splits in {train, dev, test}. Narrow-band filtering removes flagged train
and dev entries; the test split is never touched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .audio_io import BandReport
from .errors import BadLabel, BadSplit, DuplicateId, EmptySplit, MissingReport

SPLITS = ("train", "dev", "test")
LABELS = ("negative", "positive", "unknown")
LABEL_INDEX = {"negative": 0, "positive": 1}


@dataclass
class ManifestEntry:
    id: str
    wav_path: str
    label: str
    split: str
    is_narrowband: bool | None = None

    @property
    def label_index(self) -> int:
        return LABEL_INDEX[self.label]


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise DuplicateId(f"duplicate id {e.id!r}")
            seen.add(e.id)
            if e.label not in LABELS:
                raise BadLabel(f"{e.id}: label {e.label!r}")
            if e.split not in SPLITS:
                raise BadSplit(f"{e.id}: split {e.split!r}")
            if e.label == "unknown" and e.split != "test":
                raise BadLabel(f"{e.id}: unknown label outside the test split")

    def split_entries(self, split: str) -> list[ManifestEntry]:
        if split not in SPLITS:
            raise BadSplit(f"unknown split {split!r}")
        return [e for e in self.entries if e.split == split]

    def by_id(self) -> dict[str, ManifestEntry]:
        return {e.id: e for e in self.entries}

    def class_counts(self, split: str) -> dict[str, int]:
        counts = {label: 0 for label in LABELS}
        for e in self.split_entries(split):
            counts[e.label] += 1
        counts["total"] = len(self.split_entries(split))
        return counts


def load_manifest(path) -> Manifest:
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "wav_path", "label", "split"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise BadSplit(f"{path}: manifest header must contain {sorted(required)}")
        for row in reader:
            nb = row.get("is_narrowband", "")
            entries.append(
                ManifestEntry(
                    id=row["id"],
                    wav_path=row["wav_path"],
                    label=row["label"],
                    split=row["split"],
                    is_narrowband=None if nb in ("", None) else nb == "true",
                )
            )
    return Manifest(entries)


def save_manifest(m: Manifest, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "wav_path", "label", "split", "is_narrowband"])
        for e in m.entries:
            nb = "" if e.is_narrowband is None else ("true" if e.is_narrowband else "false")
            writer.writerow([e.id, e.wav_path, e.label, e.split, nb])


def filter_narrowband(m: Manifest, reports: dict[str, BandReport | bool]) -> Manifest:
    """Drop narrow-band train/dev entries; the test split passes through.

    reports maps entry id to a BandReport (or a plain bool flag) and must
    cover every train and dev entry.
    """
    kept = []
    for e in m.entries:
        if e.split == "test":
            kept.append(replace(e))
            continue
        if e.id not in reports:
            raise MissingReport(f"no bandwidth report for {e.id!r}")
        r = reports[e.id]
        narrow = r.is_narrowband if isinstance(r, BandReport) else bool(r)
        if not narrow:
            kept.append(replace(e, is_narrowband=False))
    return Manifest(kept)


def batches(m: Manifest, split: str, batch_size: int, seed: int,
            pass_index: int = 0) -> list[list[str]]:
    """One shuffled pass over a split, grouped; the final short group is kept."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    ids = [e.id for e in m.split_entries(split)]
    if not ids:
        raise EmptySplit(f"split {split!r} is empty")
    order = np.random.default_rng([seed, pass_index]).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]


def stats(m: Manifest) -> dict:
    return {split: m.class_counts(split) for split in SPLITS}
