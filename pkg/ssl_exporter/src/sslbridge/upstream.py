"""Stand-in implementations of the four upstream encoder families.

Each wrapper reproduces the family's interface geometry: input handling
(raw waveform vs internal log-mel front end), output width, frame rate
(one vector per 10 ms hop) and extraction mode (encoder hidden state,
last transformer layer, or a learned weighted sum over layers).

Pretraining is out of scope: weights are consumed as-is from a checkpoint
file when one is given, otherwise seeded-random initialization provides a
deterministic pipeline-testing mode for environments without access to the
upstream model zoos.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

SAMPLE_RATE = 16000
FRAME_WIN = 400   # 25 ms
FRAME_HOP = 160   # 10 ms


class ModelLoadFailure(Exception):
    pass


class DimMismatch(Exception):
    pass


@dataclass(frozen=True)
class UpstreamSpec:
    name: str
    expected_dim: int
    extraction_mode: str  # encoder-hidden | last-layer | weighted-sum


UPSTREAMS = {
    "cpc": UpstreamSpec("cpc", 256, "encoder-hidden"),
    "pase+": UpstreamSpec("pase+", 256, "last-layer"),
    "tera": UpstreamSpec("tera", 768, "last-layer"),
    "mockingjay": UpstreamSpec("mockingjay", 768, "weighted-sum"),
}


def nominal_frames(n_samples: int) -> int:
    """Frame count of the 25 ms / 10 ms analysis grid."""
    return 1 + max(0, n_samples - FRAME_WIN) // FRAME_HOP


class _MelFrontEnd(nn.Module):
    """80-bin log-mel frames on the shared grid, for the transformer models."""

    def __init__(self, n_mels: int = 80):
        super().__init__()
        window = torch.hann_window(FRAME_WIN, periodic=True, dtype=torch.float64)
        self.register_buffer("window", window)
        freqs = np.fft.rfftfreq(FRAME_WIN, 1.0 / SAMPLE_RATE)

        def mel(f):
            return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

        def imel(m):
            return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

        edges = imel(np.linspace(mel(0.0), mel(SAMPLE_RATE / 2), n_mels + 2))
        lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
        rising = (freqs[None, :] - lower) / (center - lower)
        falling = (upper - freqs[None, :]) / (upper - center)
        bank = np.maximum(0.0, np.minimum(rising, falling))
        self.register_buffer("bank", torch.from_numpy(bank))

    def forward(self, wav: torch.Tensor) -> torch.Tensor:
        frames = wav.to(torch.float64).unfold(0, FRAME_WIN, FRAME_HOP) * self.window
        power = torch.fft.rfft(frames, dim=1).abs() ** 2
        logmel = torch.log(torch.clamp(power @ self.bank.T, min=1e-10))
        return logmel.to(torch.float32)


class CpcStyleEncoder(nn.Module):
    """Strided convolutional encoder plus a GRU context network; features
    come from the encoder hidden state."""

    def __init__(self, dim: int = 256):
        super().__init__()
        self.frame = nn.Conv1d(1, dim, FRAME_WIN, stride=FRAME_HOP)
        self.mixer = nn.Sequential(
            nn.ReLU(), nn.Conv1d(dim, dim, 1), nn.ReLU(), nn.Conv1d(dim, dim, 1)
        )
        self.context = nn.GRU(dim, dim, batch_first=True)

    @torch.no_grad()
    def encode(self, wav: torch.Tensor) -> torch.Tensor:
        z = self.mixer(self.frame(wav[None, None, :]))  # (1, dim, T)
        return z[0].T.contiguous()  # encoder hidden, (T, dim)


class PaseStyleEncoder(nn.Module):
    """Waveform conv stack with residual refinement blocks; features are the
    last layer's output."""

    def __init__(self, dim: int = 256, hidden: int = 64, n_blocks: int = 3):
        super().__init__()
        self.front = nn.Conv1d(1, hidden, FRAME_WIN, stride=FRAME_HOP)
        self.blocks = nn.ModuleList(
            nn.Sequential(
                nn.Conv1d(hidden, hidden, 3, padding=1),
                nn.BatchNorm1d(hidden),
                nn.ReLU(),
            )
            for _ in range(n_blocks)
        )
        self.head = nn.Conv1d(hidden, dim, 1)

    @torch.no_grad()
    def encode(self, wav: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.front(wav[None, None, :]))
        for block in self.blocks:
            h = h + block(h)
        return self.head(h)[0].T.contiguous()


class TransformerStyleEncoder(nn.Module):
    """Log-mel front end into a small transformer encoder stack.

    weighted_sum=False extracts the last layer's hidden states; True learns
    scalar layer weights and returns their softmax-weighted combination
    (the LARGE-WS style extraction).
    """

    def __init__(self, dim: int = 768, n_layers: int = 3, n_heads: int = 12,
                 weighted_sum: bool = False):
        super().__init__()
        self.front = _MelFrontEnd()
        self.proj = nn.Linear(80, dim)
        self.layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=dim, nhead=n_heads, dim_feedforward=2 * dim,
                batch_first=True, dropout=0.0,
            )
            for _ in range(n_layers)
        )
        self.weighted_sum = weighted_sum
        if weighted_sum:
            self.layer_weights = nn.Parameter(torch.zeros(n_layers + 1))

    @torch.no_grad()
    def encode(self, wav: torch.Tensor) -> torch.Tensor:
        h = self.proj(self.front(wav))[None]  # (1, T, dim)
        hidden = [h]
        for layer in self.layers:
            h = layer(h)
            hidden.append(h)
        if self.weighted_sum:
            weights = torch.softmax(self.layer_weights, dim=0)
            out = sum(w * s for w, s in zip(weights, hidden))
        else:
            out = hidden[-1]
        return out[0].contiguous()


def build_encoder(spec: UpstreamSpec, checkpoint: str | None = None,
                  seed: int = 0) -> tuple[nn.Module, dict]:
    """Instantiate the named family; load weights when given, else seed them.

    Returns (encoder in eval mode, provenance dict for the sidecar).
    """
    torch.manual_seed(seed)
    if spec.name == "cpc":
        encoder = CpcStyleEncoder(spec.expected_dim)
    elif spec.name == "pase+":
        encoder = PaseStyleEncoder(spec.expected_dim)
    elif spec.name == "tera":
        encoder = TransformerStyleEncoder(spec.expected_dim, weighted_sum=False)
    elif spec.name == "mockingjay":
        encoder = TransformerStyleEncoder(spec.expected_dim, weighted_sum=True)
    else:
        raise ModelLoadFailure(f"unknown upstream {spec.name!r}")

    if checkpoint is not None:
        try:
            state = torch.load(checkpoint, map_location="cpu", weights_only=True)
            encoder.load_state_dict(state)
        except Exception as exc:
            raise ModelLoadFailure(f"cannot load {checkpoint}: {exc}") from exc
        origin = checkpoint
    else:
        origin = f"random-init:seed={seed}"

    encoder.eval()
    buf = io.BytesIO()
    torch.save(encoder.state_dict(), buf)
    provenance = {
        "model": spec.name,
        "extraction_mode": spec.extraction_mode,
        "checkpoint": origin,
        "weights_sha256": hashlib.sha256(buf.getvalue()).hexdigest(),
    }
    return encoder, provenance
