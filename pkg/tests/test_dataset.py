import pytest

from covspeech.audio_io import BandReport
from covspeech.dataset import (
    Manifest,
    ManifestEntry,
    batches,
    filter_narrowband,
    load_manifest,
    save_manifest,
    stats,
)
from covspeech.errors import BadLabel, BadSplit, DuplicateId, EmptySplit, MissingReport
from covspeech.fixture import C19S_PLAN, SMALL_PLAN, SplitPlan, generate_corpus


def _entry(uid, label="negative", split="train"):
    return ManifestEntry(id=uid, wav_path=f"{uid}.wav", label=label, split=split)


def _write_manifest(path, rows):
    with open(path, "w") as fh:
        fh.write("id,wav_path,label,split\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


class TestLoad:
    def test_valid_rows(self, tmp_path):
        p = tmp_path / "m.csv"
        _write_manifest(p, [
            ("a", "a.wav", "positive", "train"),
            ("b", "b.wav", "negative", "dev"),
            ("c", "c.wav", "unknown", "test"),
        ])
        m = load_manifest(p)
        assert len(m.entries) == 3

    def test_duplicate_id(self, tmp_path):
        p = tmp_path / "m.csv"
        _write_manifest(p, [("a", "a.wav", "positive", "train"),
                            ("a", "b.wav", "negative", "train")])
        with pytest.raises(DuplicateId):
            load_manifest(p)

    def test_bad_label(self, tmp_path):
        p = tmp_path / "m.csv"
        _write_manifest(p, [("a", "a.wav", "maybe", "train")])
        with pytest.raises(BadLabel):
            load_manifest(p)

    def test_bad_split(self, tmp_path):
        p = tmp_path / "m.csv"
        _write_manifest(p, [("a", "a.wav", "positive", "validation")])
        with pytest.raises(BadSplit):
            load_manifest(p)

    def test_unknown_label_only_on_test(self, tmp_path):
        p = tmp_path / "m.csv"
        _write_manifest(p, [("a", "a.wav", "unknown", "train")])
        with pytest.raises(BadLabel):
            load_manifest(p)

    def test_save_roundtrip(self, tmp_path):
        m = Manifest([_entry("a"), _entry("b", "positive", "dev")])
        p = tmp_path / "out.csv"
        save_manifest(m, p)
        again = load_manifest(p)
        assert [e.id for e in again.entries] == ["a", "b"]
        assert again.entries[1].split == "dev"


class TestFilter:
    def _corpus_shaped_manifest(self):
        entries = []
        narrow = set()
        for split, sp in C19S_PLAN.items():
            labels = ["positive"] * sp.positives + ["negative"] * sp.negatives
            for i, label in enumerate(labels):
                uid = f"{split}_{i:04d}"
                entries.append(_entry(uid, "unknown" if sp.blind else label, split))
                if i < sp.narrowband:
                    narrow.add(uid)
        return Manifest(entries), narrow

    def test_c19s_shaped_counts(self):
        m, narrow = self._corpus_shaped_manifest()
        reports = {e.id: (e.id in narrow) for e in m.entries}
        filtered = filter_narrowband(m, reports)

        train = filtered.class_counts("train")
        dev = filtered.class_counts("dev")
        assert (train["total"], train["positive"]) == (299, 56)
        assert (dev["total"], dev["positive"]) == (282, 129)
        assert filtered.class_counts("test")["total"] == 283

    def test_test_split_untouched_even_when_flagged(self):
        m, narrow = self._corpus_shaped_manifest()
        reports = {e.id: True for e in m.entries}  # everything "narrow"
        filtered = filter_narrowband(m, reports)
        assert len(filtered.split_entries("test")) == 283
        assert len(filtered.split_entries("train")) == 0

    def test_missing_report(self):
        m = Manifest([_entry("a"), _entry("b", split="dev")])
        with pytest.raises(MissingReport):
            filter_narrowband(m, {"a": False})

    def test_band_report_objects_accepted(self):
        m = Manifest([_entry("a")])
        filtered = filter_narrowband(m, {"a": BandReport(0.4, False)})
        assert len(filtered.entries) == 1
        assert filtered.entries[0].is_narrowband is False


class TestBatches:
    def _manifest(self, n):
        return Manifest([_entry(f"t{i:03d}") for i in range(n)])

    def test_group_arithmetic(self):
        groups = batches(self._manifest(299), "train", 8, seed=0)
        assert len(groups) == 38
        assert len(groups[-1]) == 3
        assert all(len(g) == 8 for g in groups[:-1])

    def test_same_seed_same_order(self):
        m = self._manifest(40)
        assert batches(m, "train", 8, seed=1) == batches(m, "train", 8, seed=1)

    def test_different_seed_different_order(self):
        m = self._manifest(40)
        assert batches(m, "train", 8, seed=1) != batches(m, "train", 8, seed=2)

    def test_union_is_exact_cover(self):
        m = self._manifest(37)
        groups = batches(m, "train", 8, seed=3)
        flat = [uid for g in groups for uid in g]
        assert sorted(flat) == sorted(e.id for e in m.entries)

    def test_empty_split(self):
        with pytest.raises(EmptySplit):
            batches(self._manifest(5), "dev", 8, seed=0)


class TestFixtureGenerator:
    def test_small_plan_counts_and_splits(self, tmp_path):
        m = generate_corpus(tmp_path / "c", seed=1, duration_s=0.3, plan=SMALL_PLAN)
        assert m.class_counts("train")["total"] == 20
        assert m.class_counts("train")["positive"] == 8
        assert m.class_counts("dev")["total"] == 12
        assert m.class_counts("test")["unknown"] == 8
        # wavs exist and manifest loads back
        again = load_manifest(tmp_path / "c" / "manifest.csv")
        assert len(again.entries) == len(m.entries)
        s = stats(m)
        assert s["train"]["negative"] == 12

    def test_narrowband_planted_on_positives(self, tmp_path):
        plan = {"train": SplitPlan(negatives=3, positives=3, narrowband=2),
                "dev": SplitPlan(negatives=1, positives=1, narrowband=0),
                "test": SplitPlan(negatives=0, positives=2, narrowband=0, blind=True)}
        m = generate_corpus(tmp_path / "c", seed=2, duration_s=0.3, plan=plan)
        from covspeech.audio_io import detect_bandwidth, read_wav

        flagged = {e.id for e in m.entries
                   if detect_bandwidth(read_wav(e.wav_path)).is_narrowband}
        assert flagged == {"train_0000", "train_0001"}
        labels = {e.id: e.label for e in m.entries}
        assert all(labels[uid] == "positive" for uid in flagged)
