"""Attention explainability: average SAP weights across trained trials and
align them with the spectrogram time axis."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import ArchitectureMismatch, LengthMismatch
from .interchange import FeatureMatrix

# frames the CNN front end merges; its attention runs on the pooled grid
_UPSAMPLE_TOLERANCE = 4


@dataclass
class AttentionTrace:
    utterance_id: str
    time_axis_s: np.ndarray
    weights: np.ndarray
    n_trials_averaged: int


def _model_signature(model) -> tuple:
    desc = model.descriptor()
    desc.pop("dropout_p", None)
    return tuple(sorted(desc.items()))


def collect_attention(models, feats: np.ndarray, utterance_id: str = "",
                      frame_shift_ms: float = 10.0) -> AttentionTrace:
    """Eval-mode attention weights per model, averaged, renormalized to sum 1.

    CNN-family weights live on the front-pooled grid; each pooled weight is
    spread evenly over the frames it covers so the trace aligns with the
    10 ms spectrogram grid and keeps its total mass.
    """
    if not models:
        raise ArchitectureMismatch("need at least one checkpoint")
    signatures = {_model_signature(m) for m in models}
    if len(signatures) > 1:
        raise ArchitectureMismatch("checkpoints disagree on architecture")
    family = models[0].family

    traces = []
    for m in models:
        _, alpha = m.forward(feats, training=False)
        if alpha is None:
            raise ArchitectureMismatch("mean pooling has no attention weights")
        if family == "cnn":
            k = m.pool_frames
            alpha = np.repeat(alpha / k, k)
        traces.append(alpha)
    mean = np.mean(np.stack(traces), axis=0)
    mean = mean / mean.sum()
    time_axis = np.arange(len(mean)) * (frame_shift_ms / 1000.0)
    return AttentionTrace(utterance_id, time_axis, mean, len(models))


def export_trace(trace: AttentionTrace, spec: FeatureMatrix, out_dir,
                 stem: str | None = None) -> tuple[str, str]:
    """Write `time_s,weight` CSV plus a PNG of the weights over the
    log-magnitude spectrogram. Returns (csv_path, png_path)."""
    diff = spec.n_frames - len(trace.weights)
    if abs(diff) > _UPSAMPLE_TOLERANCE:
        raise LengthMismatch(
            f"trace has {len(trace.weights)} frames, spectrogram {spec.n_frames}"
        )
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or (trace.utterance_id or "trace")
    csv_path = os.path.join(out_dir, f"{stem}.attention.csv")
    png_path = os.path.join(out_dir, f"{stem}.attention.png")

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "weight"])
        for t, w in zip(trace.time_axis_s, trace.weights):
            writer.writerow([repr(float(t)), repr(float(w))])

    n = min(spec.n_frames, len(trace.weights))
    hop_s = spec.frame_shift_ms / 1000.0

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(10, 4))
    log_mag = np.log10(np.maximum(spec.data[:n].T, 1e-10))
    ax.imshow(log_mag, aspect="auto", origin="lower", cmap="magma",
              extent=[0.0, n * hop_s, 0.0, 8000.0])
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (Hz)")
    twin = ax.twinx()
    twin.plot(trace.time_axis_s[:n], trace.weights[:n], color="red", linewidth=1.2)
    twin.set_ylabel("attention weight", color="red")
    twin.set_ylim(bottom=0.0)
    title = trace.utterance_id or "attention"
    ax.set_title(f"{title} (mean of {trace.n_trials_averaged} trials)")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return csv_path, png_path
