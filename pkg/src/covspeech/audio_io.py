"""WAV loading, normalization and bandwidth screening.

Accepted input is deliberately narrow: RIFF/WAVE, PCM (format tag 1),
16-bit little-endian, mono, 16 kHz. Anything else is rejected with an
error naming the violated field.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmptyClip, NotMono, NotPcm16, TruncatedFile, WrongSampleRate

SAMPLE_RATE = 16000
PCM_SCALE = 32768.0

DEFAULT_CUTOFF_HZ = 4000.0
DEFAULT_NARROWBAND_THRESHOLD = 1e-3


class SilentClipWarning(UserWarning):
    pass


@dataclass
class WavClip:
    """Mono waveform, amplitudes in [-1, 1], float32."""

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass
class BandReport:
    high_band_ratio: float
    is_narrowband: bool
    cutoff_hz: float = DEFAULT_CUTOFF_HZ


def read_wav(path) -> WavClip:
    """Parse a RIFF/WAVE file into a normalized-amplitude-domain clip.

    Integer samples map to reals by s / 32768, so the positive peak is
    32767/32768 and the roundtrip through write_wav is sample-exact.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise TruncatedFile(f"{path}: not a RIFF/WAVE container")

    fmt = None
    data = None
    off = 12
    while off + 8 <= len(raw):
        cid, size = struct.unpack_from("<4sI", raw, off)
        body = raw[off + 8 : off + 8 + size]
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise TruncatedFile(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body)
        elif cid == b"data" and data is None:
            if len(body) < size:
                raise TruncatedFile(
                    f"{path}: data chunk declares {size} bytes, {len(body)} present"
                )
            data = body
        off += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise TruncatedFile(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _, _, bits = fmt
    if tag != 1 or bits != 16:
        raise NotPcm16(f"{path}: format tag {tag}, {bits} bits per sample")
    if channels != 1:
        raise NotMono(f"{path}: {channels} channels")
    if rate != SAMPLE_RATE:
        raise WrongSampleRate(f"{path}: {rate} Hz, expected {SAMPLE_RATE}")
    if len(data) < 2:
        raise TruncatedFile(f"{path}: empty data chunk")

    ints = np.frombuffer(data[: len(data) // 2 * 2], dtype="<i2")
    samples = (ints.astype(np.float32)) / np.float32(PCM_SCALE)
    return WavClip(samples=samples, sample_rate_hz=rate)


def write_wav(clip: WavClip, path) -> None:
    """Inverse of read_wav: real amplitudes quantized by round(x * 32768)."""
    q = np.clip(np.rint(clip.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    payload = q.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        1,
        1,
        clip.sample_rate_hz,
        clip.sample_rate_hz * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def normalize_amplitude(clip: WavClip) -> WavClip:
    """Scale so the peak absolute amplitude is exactly 1.

    All-zero input is returned unchanged with a SilentClipWarning; downstream
    filtering decides what to do with silent files.
    """
    peak = float(np.max(np.abs(clip.samples))) if len(clip.samples) else 0.0
    if peak == 0.0:
        warnings.warn("silent clip: amplitude normalization skipped", SilentClipWarning)
        return WavClip(clip.samples.copy(), clip.sample_rate_hz)
    return WavClip((clip.samples / np.float32(peak)).astype(np.float32), clip.sample_rate_hz)


def detect_bandwidth(
    clip: WavClip,
    cutoff_hz: float = DEFAULT_CUTOFF_HZ,
    threshold: float = DEFAULT_NARROWBAND_THRESHOLD,
) -> BandReport:
    """Fraction of spectral energy above the cutoff, from an averaged STFT.

    Narrow-band files (8 kHz-origin audio held at a 16 kHz rate) sit orders
    of magnitude below full-band ones, so a single ratio threshold separates
    the classes. Tonal signals have no high-frequency energy and get flagged
    narrow-band; that limitation is accepted.
    """
    if len(clip.samples) == 0:
        raise EmptyClip("cannot scan an empty clip")
    if not cutoff_hz < clip.sample_rate_hz / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie below Nyquist")

    from .spectral import FrameGrid, frame_signal

    x = clip.samples.astype(np.float64)
    grid = FrameGrid()
    win = grid.win_samples(clip.sample_rate_hz)
    if len(x) < win:
        x = np.pad(x, (0, win - len(x)))
    frames = frame_signal(WavClip(x, clip.sample_rate_hz), grid)
    power = np.abs(np.fft.rfft(frames, n=512, axis=1)) ** 2
    mean_power = power.mean(axis=0)
    freqs = np.fft.rfftfreq(512, 1.0 / clip.sample_rate_hz)
    total = float(mean_power.sum())
    if total == 0.0:
        # silent clip: no energy anywhere, treat as narrow-band
        return BandReport(0.0, True, cutoff_hz)
    ratio = float(mean_power[freqs > cutoff_hz].sum() / total)
    return BandReport(ratio, ratio < threshold, cutoff_hz)
