"""Synthetic fixture corpora.

The real corpus is challenge-restricted, so the repo ships a generator that
reproduces its shape: split sizes, class counts, and a planted subset of
band-limited recordings mimicking 8 kHz-origin audio. All pipeline tests and
the CLI walkthrough run against this fixture.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .audio_io import SAMPLE_RATE, WavClip, write_wav
from .dataset import Manifest, ManifestEntry, save_manifest

# Band-limited fixtures cut just below the 4 kHz screening cutoff, the way a
# real 8 kHz-origin file carries an anti-alias transition band below Nyquist.
NARROWBAND_EDGE_HZ = 3900.0


@dataclass
class SplitPlan:
    negatives: int
    positives: int
    narrowband: int  # planted band-limited files (positives where labeled)
    blind: bool = False  # labels recorded as "unknown"


# Corpus-shaped default: 315/295/283 files, 72/142 positives, 16/13/7
# band-limited (all in the positive class where labels exist).
C19S_PLAN = {
    "train": SplitPlan(negatives=243, positives=72, narrowband=16),
    "dev": SplitPlan(negatives=153, positives=142, narrowband=13),
    "test": SplitPlan(negatives=0, positives=283, narrowband=7, blind=True),
}

SMALL_PLAN = {
    "train": SplitPlan(negatives=12, positives=8, narrowband=2),
    "dev": SplitPlan(negatives=6, positives=6, narrowband=1),
    "test": SplitPlan(negatives=0, positives=8, narrowband=1, blind=True),
}


def band_limit(samples: np.ndarray, edge_hz: float = NARROWBAND_EDGE_HZ,
               sample_rate_hz: int = SAMPLE_RATE) -> np.ndarray:
    """Zero all spectral content at and above edge_hz."""
    spectrum = np.fft.rfft(samples)
    freqs = np.fft.rfftfreq(len(samples), 1.0 / sample_rate_hz)
    spectrum[freqs >= edge_hz] = 0.0
    return np.fft.irfft(spectrum, len(samples))


def speech_like_clip(rng: np.random.Generator, duration_s: float = 0.5,
                     narrowband: bool = False, class_shift: float = 0.0) -> WavClip:
    """Noise plus a few modulated tones; crude but full-band and non-stationary.

    class_shift nudges the tone register so the two fixture classes are not
    statistically identical.
    """
    n = int(round(duration_s * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    x = rng.normal(0.0, 0.35, n)
    for _ in range(3):
        f0 = rng.uniform(150.0, 2800.0) * (1.0 + class_shift)
        x += rng.uniform(0.3, 0.8) * np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
    x *= 0.55 + 0.45 * np.sin(2 * np.pi * rng.uniform(1.5, 4.0) * t + rng.uniform(0, 2 * np.pi))
    if narrowband:
        x = band_limit(x)
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x / peak * (32767.0 / 32768.0)
    return WavClip(x.astype(np.float32), SAMPLE_RATE)


def generate_corpus(out_dir, seed: int = 0, duration_s: float = 0.5,
                    plan: dict[str, SplitPlan] | None = None) -> Manifest:
    """Write the fixture WAVs plus manifest.csv; returns the manifest."""
    plan = plan or C19S_PLAN
    os.makedirs(out_dir, exist_ok=True)
    wav_dir = os.path.join(out_dir, "wav")
    os.makedirs(wav_dir, exist_ok=True)
    rng = np.random.default_rng(seed)

    entries = []
    for split, sp in plan.items():
        labels = ["positive"] * sp.positives + ["negative"] * sp.negatives
        # plant band-limited files on positives first (the corpus quirk the
        # filter exists to remove)
        for i, label in enumerate(labels):
            narrow = i < sp.narrowband
            clip = speech_like_clip(
                rng, duration_s, narrowband=narrow,
                class_shift=0.15 if label == "positive" else 0.0,
            )
            uid = f"{split}_{i:04d}"
            path = os.path.join(wav_dir, f"{uid}.wav")
            write_wav(clip, path)
            entries.append(
                ManifestEntry(
                    id=uid,
                    wav_path=path,
                    label="unknown" if sp.blind else label,
                    split=split,
                )
            )
    manifest = Manifest(entries)
    save_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest


def band_detection_set(n_fullband: int = 100, n_narrowband: int = 100,
                       seed: int = 0, duration_s: float = 0.5):
    """In-memory clips for screening checks: [(WavClip, is_narrowband)]."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(n_fullband):
        cases.append((speech_like_clip(rng, duration_s, narrowband=False), False))
    for _ in range(n_narrowband):
        cases.append((speech_like_clip(rng, duration_s, narrowband=True), True))
    return cases


def separable_sequences(n_train: int = 64, n_dev: int = 64, dim: int = 8,
                        seed: int = 0, t_range: tuple[int, int] = (10, 30),
                        noise: float = 1.0):
    """Linearly separable sequence task: class means at +/-1 per dimension.

    Returns (train_items, dev_items) as lists of ((T, dim) float32, label).
    """
    rng = np.random.default_rng(seed)

    def make(n):
        items = []
        for i in range(n):
            label = i % 2
            t = int(rng.integers(t_range[0], t_range[1] + 1))
            mean = 1.0 if label == 1 else -1.0
            feats = rng.normal(mean, noise, size=(t, dim)).astype(np.float32)
            items.append((feats, label))
        return items

    return make(n_train), make(n_dev)
