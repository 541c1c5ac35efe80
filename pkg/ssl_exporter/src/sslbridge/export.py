"""Batch export: WAV directory -> one .feat file per clip plus sidecars."""

from __future__ import annotations

import os
import struct

import numpy as np
import torch

from .featfile import write_feat, write_sidecar
from .upstream import (
    FRAME_WIN,
    SAMPLE_RATE,
    UPSTREAMS,
    DimMismatch,
    UpstreamSpec,
    build_encoder,
    nominal_frames,
)

FRAME_SHIFT_MS = 10.0
FRAME_TOLERANCE = 2


def read_wav_mono16k(path) -> np.ndarray:
    """Minimal PCM16 mono 16 kHz reader; samples scaled by 1/32768."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    off, fmt, data = 12, None, None
    while off + 8 <= len(raw):
        cid, size = struct.unpack_from("<4sI", raw, off)
        body = raw[off + 8 : off + 8 + size]
        if cid == b"fmt ":
            fmt = struct.unpack_from("<HHIIHH", body)
        elif cid == b"data":
            data = body
        off += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _, _, bits = fmt
    if (tag, channels, rate, bits) != (1, 1, SAMPLE_RATE, 16):
        raise ValueError(f"{path}: need PCM16 mono {SAMPLE_RATE} Hz")
    return np.frombuffer(data, dtype="<i2").astype(np.float32) / 32768.0


def export(spec: UpstreamSpec, wav_dir, out_dir, checkpoint: str | None = None,
           seed: int = 0) -> int:
    """Encode every WAV in wav_dir; returns the number of files written."""
    encoder, provenance = build_encoder(spec, checkpoint, seed)
    os.makedirs(out_dir, exist_ok=True)
    names = sorted(n for n in os.listdir(wav_dir) if n.lower().endswith(".wav"))
    written = 0
    for name in names:
        wav_path = os.path.join(wav_dir, name)
        samples = read_wav_mono16k(wav_path)
        if len(samples) < FRAME_WIN:
            raise ValueError(f"{wav_path}: shorter than one analysis window")
        feats = encoder.encode(torch.from_numpy(samples)).numpy()
        if feats.shape[1] != spec.expected_dim:
            raise DimMismatch(
                f"{spec.name} emitted dim {feats.shape[1]}, expected {spec.expected_dim}"
            )
        grid = nominal_frames(len(samples))
        delta = feats.shape[0] - grid
        if abs(delta) > FRAME_TOLERANCE:
            raise DimMismatch(
                f"{wav_path}: {feats.shape[0]} frames vs {grid} on the 10 ms grid"
            )
        stem = os.path.splitext(name)[0]
        feat_path = os.path.join(out_dir, f"{stem}.{spec.name}.feat")
        write_feat(feats, FRAME_SHIFT_MS, spec.name, feat_path)
        write_sidecar(feat_path, {
            **provenance,
            "source_wav": os.path.abspath(wav_path),
            "n_frames": int(feats.shape[0]),
            "nominal_grid_frames": int(grid),
            "frame_count_delta": int(delta),
        })
        written += 1
    return written


def get_upstream(name: str) -> UpstreamSpec:
    try:
        return UPSTREAMS[name]
    except KeyError:
        raise ValueError(f"unknown upstream {name!r}; choose from {sorted(UPSTREAMS)}") from None
