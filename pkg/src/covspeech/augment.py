"""Waveform augmentation: pitch randomization, reverberance, time clipping.

Applied in that order to every training utterance, producing exactly one
augmented twin per file and doubling the train split. The paper names the
three transforms but not their magnitudes; the ranges here are moderate
defaults and all config-exposed.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace as dc_replace

import numpy as np
from scipy.signal import fftconvolve, resample

from .audio_io import WavClip, read_wav, write_wav
from .dataset import Manifest, ManifestEntry

_PV_NFFT = 1024
_PV_HOP = 256
_IR_PATTERN_SEED = 12043


@dataclass
class AugmentSpec:
    pitch_cents_range: tuple[float, float] = (-300.0, 300.0)
    reverb_room_scale_range: tuple[float, float] = (0.0, 100.0)
    clip_keep_fraction_range: tuple[float, float] = (0.8, 1.0)
    seed: int = 0

    def __post_init__(self):
        for lo, hi in (self.pitch_cents_range, self.reverb_room_scale_range,
                       self.clip_keep_fraction_range):
            if lo > hi:
                raise ValueError("augmentation range is reversed")
        lo, hi = self.clip_keep_fraction_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("keep fraction range must lie in (0, 1]")


def _stft(x: np.ndarray) -> np.ndarray:
    w = np.hanning(_PV_NFFT + 1)[:-1]
    pad = np.pad(x, (0, _PV_NFFT))
    n_frames = 1 + (len(pad) - _PV_NFFT) // _PV_HOP
    idx = np.arange(_PV_NFFT)[None, :] + _PV_HOP * np.arange(n_frames)[:, None]
    return np.fft.rfft(pad[idx] * w[None, :], axis=1)


def _istft(frames: np.ndarray, length: int) -> np.ndarray:
    w = np.hanning(_PV_NFFT + 1)[:-1]
    n_frames = frames.shape[0]
    out = np.zeros((n_frames - 1) * _PV_HOP + _PV_NFFT)
    norm = np.zeros_like(out)
    chunks = np.fft.irfft(frames, _PV_NFFT, axis=1) * w[None, :]
    for i in range(n_frames):
        start = i * _PV_HOP
        out[start : start + _PV_NFFT] += chunks[i]
        norm[start : start + _PV_NFFT] += w * w
    out /= np.maximum(norm, 1e-8)
    if len(out) < length:
        out = np.pad(out, (0, length - len(out)))
    return out[:length]


def _phase_vocoder(frames: np.ndarray, rate: float) -> np.ndarray:
    """Resample the STFT time axis by `rate` with phase accumulation."""
    n_frames, n_bins = frames.shape
    steps = np.arange(0.0, n_frames, rate)
    advance = 2.0 * np.pi * _PV_HOP * np.arange(n_bins) / _PV_NFFT
    padded = np.vstack([frames, np.zeros((2, n_bins), dtype=frames.dtype)])
    out = np.zeros((len(steps), n_bins), dtype=complex)
    phase = np.angle(frames[0])
    for i, s in enumerate(steps):
        j = int(s)
        frac = s - j
        lo, hi = padded[j], padded[j + 1]
        mag = (1.0 - frac) * np.abs(lo) + frac * np.abs(hi)
        out[i] = mag * np.exp(1j * phase)
        dphi = np.angle(hi) - np.angle(lo) - advance
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase = phase + advance + dphi
    return out


def _time_stretch(x: np.ndarray, factor: float) -> np.ndarray:
    """Change duration by `factor` (> 1 slows down) without moving pitch."""
    target = max(1, int(round(len(x) * factor)))
    stretched = _istft(_phase_vocoder(_stft(x), 1.0 / factor), target)
    return stretched


def pitch_randomize(clip: WavClip, cents: float) -> WavClip:
    """Shift pitch by 2^(cents/1200); duration is preserved.

    Time-stretch by the pitch factor, then resample back to the original
    length, which scales all frequencies by the factor.
    """
    n = len(clip.samples)
    if cents == 0.0:
        return WavClip(clip.samples.copy(), clip.sample_rate_hz)
    factor = 2.0 ** (cents / 1200.0)
    stretched = _time_stretch(np.asarray(clip.samples, dtype=np.float64), factor)
    shifted = resample(stretched, n)
    return WavClip(shifted.astype(np.float32), clip.sample_rate_hz)


def make_impulse_response(room_scale: float, sample_rate_hz: int = 16000) -> np.ndarray:
    """Direct path plus an exponentially decaying pseudo-noise tail.

    RT60 grows linearly with room_scale; the tail magnitude follows the decay
    envelope exactly (deterministic signs), so windowed energy after the
    direct path is monotone non-increasing. room_scale 0 collapses to a delta.
    """
    if not 0.0 <= room_scale <= 100.0:
        raise ValueError(f"room_scale {room_scale} outside [0, 100]")
    if room_scale == 0.0:
        return np.array([1.0])
    rt60_s = 0.05 + 0.0075 * room_scale
    tail_len = int(rt60_s * sample_rate_hz)
    # amplitude decays 60 dB (1e-3) across rt60
    tau = rt60_s * sample_rate_hz / np.log(1e3)
    n = np.arange(1, tail_len + 1)
    signs = np.where(np.random.default_rng(_IR_PATTERN_SEED).random(tail_len) < 0.5, -1.0, 1.0)
    wet = 0.6 * room_scale / 100.0
    h = np.zeros(tail_len + 1)
    h[0] = 1.0
    h[1:] = wet * signs * np.exp(-n / tau)
    return h


def reverberate(clip: WavClip, room_scale: float) -> WavClip:
    """Convolve with the synthetic IR; output renormalized to the input peak."""
    h = make_impulse_response(room_scale, clip.sample_rate_hz)
    x = np.asarray(clip.samples, dtype=np.float64)
    y = fftconvolve(x, h)[: len(x)]
    peak_in = np.max(np.abs(x))
    peak_out = np.max(np.abs(y))
    if peak_out > 0 and peak_in > 0:
        y = y * (peak_in / peak_out)
    return WavClip(y.astype(np.float32), clip.sample_rate_hz)


def time_clip(clip: WavClip, keep_fraction: float, seed: int = 0) -> WavClip:
    """Keep a random contiguous crop of round(keep_fraction * N) samples."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction {keep_fraction} outside (0, 1]")
    n = len(clip.samples)
    keep = max(1, int(round(keep_fraction * n)))
    if keep >= n:
        return WavClip(clip.samples.copy(), clip.sample_rate_hz)
    offset = int(np.random.default_rng(seed).integers(0, n - keep + 1))
    return WavClip(clip.samples[offset : offset + keep].copy(), clip.sample_rate_hz)


def augment_clip(clip: WavClip, spec: AugmentSpec, rng: np.random.Generator) -> WavClip:
    """pitch -> reverb -> clip, with a final amplitude safety net."""
    cents = rng.uniform(*spec.pitch_cents_range)
    room = rng.uniform(*spec.reverb_room_scale_range)
    keep = rng.uniform(*spec.clip_keep_fraction_range)
    crop_seed = int(rng.integers(2**31))
    out = pitch_randomize(clip, cents)
    out = reverberate(out, room)
    out = time_clip(out, keep, seed=crop_seed)
    peak = np.max(np.abs(out.samples)) if len(out.samples) else 0.0
    if peak > 1.0:
        out = WavClip((out.samples / peak).astype(np.float32), out.sample_rate_hz)
    return out


def _file_rng(spec_seed: int, uid: str) -> np.random.Generator:
    # keyed per file so augmentation order never matters
    return np.random.default_rng([spec_seed, zlib.crc32(uid.encode("utf-8"))])


def augment_manifest(manifest: Manifest, spec: AugmentSpec, out_dir) -> Manifest:
    """Give every train entry exactly one augmented twin; dev/test untouched."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    entries = [dc_replace(e) for e in manifest.entries]
    for e in manifest.entries:
        if e.split != "train":
            continue
        clip = read_wav(e.wav_path)
        twin = augment_clip(clip, spec, _file_rng(spec.seed, e.id))
        uid = f"{e.id}__aug"
        path = os.path.join(out_dir, f"{uid}.wav")
        write_wav(twin, path)
        entries.append(ManifestEntry(id=uid, wav_path=path, label=e.label, split="train"))
    return Manifest(entries)
