"""Handcrafted frame features on the 25 ms / 10 ms grid.

Four families share one framing front end, so every extractor emits the same
number of frames T = 1 + floor((N - 400) / 160) for a clip of N samples:

  spectrogram  T x 257   linear magnitude, 512-point FFT (window zero-padded)
  mel          T x 80    triangular mel filterbank over the 400-point power
                         spectrum, slaney-style area normalization
  mfcc         T x 39    13 cepstral coefficients + deltas + delta-deltas
  fbank        T x 240   80 log-mel energies + deltas + delta-deltas

Everything is computed in float64 and stored as float32, matching the
interchange container. log is always floored (log(max(x, 1e-10))) so silence
cannot produce non-finite values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .audio_io import WavClip
from .errors import ClipTooShort
from .interchange import FeatureMatrix

LOG_FLOOR = 1e-10


@dataclass
class FrameGrid:
    win_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hann"

    def win_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.win_ms * sample_rate_hz / 1000.0))

    def hop_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.hop_ms * sample_rate_hz / 1000.0))


@dataclass
class SpectralConfig:
    n_fft_spec: int = 512
    n_fft_mel: int = 400
    n_mel: int = 80
    n_mfcc: int = 13
    n_mfcc_filters: int = 23
    n_fft_mfcc: int = 512
    delta_window: int = 2
    fmin_hz: float = 0.0
    fmax_hz: float = 8000.0


def _window(name: str, n: int) -> np.ndarray:
    if name != "hann":
        raise ValueError(f"unsupported window {name!r}")
    # periodic hann, the usual STFT analysis choice
    return np.hanning(n + 1)[:-1]


def frame_signal(clip: WavClip, grid: FrameGrid | None = None) -> np.ndarray:
    """Slice the clip into windowed frames, (T, win) float64, no padding."""
    grid = grid or FrameGrid()
    win = grid.win_samples(clip.sample_rate_hz)
    hop = grid.hop_samples(clip.sample_rate_hz)
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < win:
        raise ClipTooShort(f"{len(x)} samples, need at least {win}")
    t = 1 + (len(x) - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(t)[:, None]
    return x[idx] * _window(grid.window, win)[None, :]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_fft: int,
    sample_rate_hz: int,
    n_filters: int,
    fmin_hz: float = 0.0,
    fmax_hz: float = 8000.0,
    norm: str | None = None,
) -> np.ndarray:
    """(n_filters, n_fft//2 + 1) triangular filters, equally spaced in mel.

    norm="slaney" divides each triangle by its bandwidth so filters have
    equal area; norm=None keeps unit peaks.
    """
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_filters + 2))
    bin_hz = np.fft.rfftfreq(n_fft, 1.0 / sample_rate_hz)
    lower = edges_hz[:-2][:, None]
    center = edges_hz[1:-1][:, None]
    upper = edges_hz[2:][:, None]
    rising = (bin_hz[None, :] - lower) / (center - lower)
    falling = (upper - bin_hz[None, :]) / (upper - center)
    bank = np.maximum(0.0, np.minimum(rising, falling))
    if norm == "slaney":
        bank *= (2.0 / (upper - lower))
    elif norm is not None:
        raise ValueError(f"unknown norm {norm!r}")
    return bank


def _power_frames(clip: WavClip, grid: FrameGrid | None, n_fft: int) -> np.ndarray:
    frames = frame_signal(clip, grid)
    return np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2


def log_floor(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, LOG_FLOOR))


def deltas(x: np.ndarray, order: int = 1) -> np.ndarray:
    """Regression derivatives, window 2, edges replicated.

    d_t = sum_{n=1..2} n * (x[t+n] - x[t-n]) / (2 * sum n^2); order=2 applies
    the same stencil twice.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = np.asarray(x, dtype=np.float64)
    for _ in range(order):
        xp = np.concatenate([x[:1], x[:1], x, x[-1:], x[-1:]], axis=0)
        t = len(x)
        x = ((xp[3 : 3 + t] - xp[1 : 1 + t]) + 2.0 * (xp[4 : 4 + t] - xp[0:t])) / 10.0
    return x


def _with_deltas(base: np.ndarray) -> np.ndarray:
    d1 = deltas(base, 1)
    d2 = deltas(d1, 1)
    return np.concatenate([base, d1, d2], axis=1)


def spectrogram_257(clip: WavClip, grid: FrameGrid | None = None,
                    cfg: SpectralConfig | None = None) -> FeatureMatrix:
    """Linear magnitude spectrum; bin 0 carries the raw (DC) energy."""
    cfg = cfg or SpectralConfig()
    grid = grid or FrameGrid()
    frames = frame_signal(clip, grid)
    mag = np.abs(np.fft.rfft(frames, n=cfg.n_fft_spec, axis=1))
    return FeatureMatrix(mag.astype(np.float32), grid.hop_ms, "spectrogram")


def mel_80(clip: WavClip, grid: FrameGrid | None = None,
           cfg: SpectralConfig | None = None) -> FeatureMatrix:
    cfg = cfg or SpectralConfig()
    grid = grid or FrameGrid()
    power = _power_frames(clip, grid, cfg.n_fft_mel)
    bank = mel_filterbank(cfg.n_fft_mel, clip.sample_rate_hz, cfg.n_mel,
                          cfg.fmin_hz, cfg.fmax_hz, norm="slaney")
    return FeatureMatrix((power @ bank.T).astype(np.float32), grid.hop_ms, "mel")


def mfcc_39(clip: WavClip, grid: FrameGrid | None = None,
            cfg: SpectralConfig | None = None) -> FeatureMatrix:
    cfg = cfg or SpectralConfig()
    grid = grid or FrameGrid()
    power = _power_frames(clip, grid, cfg.n_fft_mfcc)
    bank = mel_filterbank(cfg.n_fft_mfcc, clip.sample_rate_hz, cfg.n_mfcc_filters,
                          cfg.fmin_hz, cfg.fmax_hz, norm=None)
    logmel = log_floor(power @ bank.T)
    ceps = dct(logmel, type=2, norm="ortho", axis=1)[:, : cfg.n_mfcc]
    return FeatureMatrix(_with_deltas(ceps).astype(np.float32), grid.hop_ms, "mfcc")


def fbank_240(clip: WavClip, grid: FrameGrid | None = None,
              cfg: SpectralConfig | None = None) -> FeatureMatrix:
    cfg = cfg or SpectralConfig()
    grid = grid or FrameGrid()
    power = _power_frames(clip, grid, cfg.n_fft_mel)
    bank = mel_filterbank(cfg.n_fft_mel, clip.sample_rate_hz, cfg.n_mel,
                          cfg.fmin_hz, cfg.fmax_hz, norm="slaney")
    base = log_floor(power @ bank.T)
    return FeatureMatrix(_with_deltas(base).astype(np.float32), grid.hop_ms, "fbank")


EXTRACTORS = {
    "spectrogram": spectrogram_257,
    "mel": mel_80,
    "mfcc": mfcc_39,
    "fbank": fbank_240,
}


def extract(clip: WavClip, kind: str, grid: FrameGrid | None = None,
            cfg: SpectralConfig | None = None) -> FeatureMatrix:
    try:
        fn = EXTRACTORS[kind]
    except KeyError:
        raise ValueError(f"unknown feature type {kind!r}") from None
    return fn(clip, grid, cfg)
