"""The two classifier families.

Head family: precomputed frame features -> FC+tanh projection to size k ->
Mean or self-attention pooling -> dropout -> 2-logit classifier.

CNN family: linear spectrogram -> 50 ms average pooling -> three 1-D conv
layers along time (frequency bins as input channels, 160 channels, kernel 5,
stride 1, pad 2, each followed by ReLU and dropout) -> self-attention
pooling -> 160-wide FFN with ReLU -> 2 logits.

Self-attention pooling computes alpha = softmax(X @ W_c) over frames and
H = sum_t alpha_t x_t; with W_c = 0 it degenerates to mean pooling. W_c is
zero-initialized so training starts from the mean-pooling solution.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .errors import (
    BadMagic,
    DimMismatch,
    EmptyInput,
    InputTooShort,
    Truncated,
    VersionMismatch,
)
from .tensor import Tensor

CKPT_MAGIC = b"CKPT"
CKPT_VERSION = 1

HEAD_HIDDEN_SIZES = (128, 256, 512, 768)


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return tz.parameter(rng.uniform(-bound, bound, size=shape).astype(dtype))


@dataclass
class ProjectionHead:
    W_p: Tensor
    b_p: Tensor


@dataclass
class PoolingLayer:
    mode: str  # "mean" | "sap"
    W_c: Tensor | None = None


@dataclass
class ClassifierHead:
    dropout_p: float
    W_o: Tensor
    b_o: Tensor


def project(x_raw: Tensor, head: ProjectionHead) -> Tensor:
    """tanh(X @ W_p.T + b_p), rows land in (-1, 1)^k."""
    if x_raw.data.shape[1] != head.W_p.data.shape[1]:
        raise DimMismatch(
            f"feature dim {x_raw.data.shape[1]} vs projection {head.W_p.data.shape[1]}"
        )
    return tz.tanh(tz.affine(x_raw, head.W_p, head.b_p))


def pool(x: Tensor, layer: PoolingLayer) -> tuple[Tensor, Tensor | None]:
    """Aggregate (T, k) frames to one utterance vector.

    Mean mode returns (H, None); SAP returns (H, alpha) with alpha the
    softmax of per-frame scores X @ W_c.
    """
    if x.data.ndim != 2 or x.data.shape[0] < 1:
        raise EmptyInput(f"cannot pool shape {x.data.shape}")
    if layer.mode == "mean":
        return tz.mean_rows(x), None
    if layer.mode == "sap":
        scores = tz.matvec(x, layer.W_c)
        alpha = tz.softmax_rows(scores)
        return tz.weighted_sum(alpha, x), alpha
    raise ValueError(f"unknown pooling mode {layer.mode!r}")


def classify(h: Tensor, head: ClassifierHead, training: bool = False,
             rng: np.random.Generator | None = None) -> Tensor:
    if h.data.shape[0] != head.W_o.data.shape[1]:
        raise DimMismatch(f"pooled dim {h.data.shape[0]} vs classifier {head.W_o.data.shape}")
    return tz.affine(tz.dropout(h, head.dropout_p, training, rng), head.W_o, head.b_o)


def predicted_label(logits: np.ndarray) -> int:
    # argmax; exact tie resolves to the negative class (index 0)
    return int(np.argmax(logits))


class HeadModel:
    family = "head"

    def __init__(self, in_dim: int, k: int, pooling: str = "sap",
                 dropout_p: float = 0.1, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.in_dim = in_dim
        self.k = k
        self.dropout_p = dropout_p
        self.seed = seed
        self.proj = ProjectionHead(
            W_p=_uniform(rng, (k, in_dim), in_dim, dtype),
            b_p=_uniform(rng, (k,), in_dim, dtype),
        )
        w_c = tz.parameter(np.zeros(k, dtype=dtype)) if pooling == "sap" else None
        self.pooling = PoolingLayer(mode=pooling, W_c=w_c)
        self.head = ClassifierHead(
            dropout_p=dropout_p,
            W_o=_uniform(rng, (2, k), k, dtype),
            b_o=_uniform(rng, (2,), k, dtype),
        )

    def parameters(self) -> list[tuple[str, Tensor]]:
        params = [("proj.W_p", self.proj.W_p), ("proj.b_p", self.proj.b_p)]
        if self.pooling.W_c is not None:
            params.append(("pool.W_c", self.pooling.W_c))
        params += [("head.W_o", self.head.W_o), ("head.b_o", self.head.b_o)]
        return params

    def forward(self, feats: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None):
        """-> (logits Tensor of shape (2,), alpha ndarray of shape (T,) or None)."""
        x_raw = tz.constant(np.asarray(feats, dtype=self.proj.W_p.data.dtype))
        x = project(x_raw, self.proj)
        h, alpha = pool(x, self.pooling)
        logits = classify(h, self.head, training, rng)
        return logits, (None if alpha is None else alpha.data)

    def descriptor(self) -> dict:
        return {
            "family": self.family,
            "in_dim": self.in_dim,
            "k": self.k,
            "pooling": self.pooling.mode,
            "dropout_p": self.dropout_p,
        }


class CnnSapModel:
    """Fully-supervised comparison model over the raw spectrogram."""

    family = "cnn"

    def __init__(self, in_dim: int = 257, channels: int = 160, kernel: int = 5,
                 stride: int = 1, pad: int = 2, n_layers: int = 3,
                 pool_frames: int = 5, dropout_p: float = 0.1, seed: int = 0,
                 dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.in_dim = in_dim
        self.channels = channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self.n_layers = n_layers
        self.pool_frames = pool_frames
        self.dropout_p = dropout_p
        self.seed = seed

        self.conv_w = []
        self.conv_b = []
        for layer in range(n_layers):
            c_in = in_dim if layer == 0 else channels
            fan_in = c_in * kernel
            self.conv_w.append(_uniform(rng, (channels, c_in, kernel), fan_in, dtype))
            self.conv_b.append(_uniform(rng, (channels,), fan_in, dtype))
        self.pooling = PoolingLayer(mode="sap", W_c=tz.parameter(np.zeros(channels, dtype=dtype)))
        self.ffn_w = _uniform(rng, (channels, channels), channels, dtype)
        self.ffn_b = _uniform(rng, (channels,), channels, dtype)
        self.out_w = _uniform(rng, (2, channels), channels, dtype)
        self.out_b = _uniform(rng, (2,), channels, dtype)

    def parameters(self) -> list[tuple[str, Tensor]]:
        params = []
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b), start=1):
            params += [(f"conv{i}.w", w), (f"conv{i}.b", b)]
        params += [
            ("pool.W_c", self.pooling.W_c),
            ("ffn.w", self.ffn_w), ("ffn.b", self.ffn_b),
            ("out.w", self.out_w), ("out.b", self.out_b),
        ]
        return params

    def forward(self, spec: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None):
        return cnn_forward(spec, self, training, rng)

    def descriptor(self) -> dict:
        return {
            "family": self.family,
            "in_dim": self.in_dim,
            "channels": self.channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "pad": self.pad,
            "n_layers": self.n_layers,
            "pool_frames": self.pool_frames,
            "dropout_p": self.dropout_p,
        }


def cnn_forward(spec: np.ndarray, m: CnnSapModel, training: bool = False,
                rng: np.random.Generator | None = None):
    """Spectrogram (T, in_dim) on the 10 ms grid -> (logits, alpha over T').

    The front end averages non-overlapping groups of pool_frames frames
    (50 ms window and stride on the default grid); remainder frames drop.
    """
    spec = np.asarray(spec, dtype=m.conv_w[0].data.dtype)
    if spec.ndim != 2 or spec.shape[1] != m.in_dim:
        raise DimMismatch(f"expected (T, {m.in_dim}) spectrogram, got {spec.shape}")
    t = spec.shape[0]
    if t < m.pool_frames:
        raise InputTooShort(f"{t} frames, front pooling needs {m.pool_frames}")
    t_pooled = t // m.pool_frames
    pooled = spec[: t_pooled * m.pool_frames].reshape(t_pooled, m.pool_frames, m.in_dim).mean(axis=1)

    h = tz.constant(np.ascontiguousarray(pooled.T))
    for w, b in zip(m.conv_w, m.conv_b):
        h = tz.relu(tz.conv1d(h, w, b, stride=m.stride, pad=m.pad))
        h = tz.dropout(h, m.dropout_p, training, rng)
    frames = tz.transpose(h)  # (T', channels)
    pooled_vec, alpha = pool(frames, m.pooling)
    hidden = tz.relu(tz.affine(pooled_vec, m.ffn_w, m.ffn_b))
    logits = tz.affine(hidden, m.out_w, m.out_b)
    return logits, alpha.data


def build_model(desc: dict, dtype=np.float32):
    if desc["family"] == "head":
        return HeadModel(desc["in_dim"], desc["k"], desc["pooling"],
                         desc.get("dropout_p", 0.1), dtype=dtype)
    if desc["family"] == "cnn":
        return CnnSapModel(desc["in_dim"], desc["channels"], desc["kernel"],
                           desc["stride"], desc["pad"], desc["n_layers"],
                           desc["pool_frames"], desc.get("dropout_p", 0.1), dtype=dtype)
    raise ValueError(f"unknown model family {desc['family']!r}")


def model_state_bytes(model, extra: dict | None = None) -> bytes:
    """Checkpoint serialization: CKPT magic, version, JSON descriptor, flat
    f32 parameter payload in registry order."""
    desc = model.descriptor()
    if extra:
        desc = {**desc, **extra}
    desc_bytes = json.dumps(desc, sort_keys=True).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(t.data, dtype="<f4").tobytes() for _, t in model.parameters()
    )
    return (CKPT_MAGIC + struct.pack("<II", CKPT_VERSION, len(desc_bytes))
            + desc_bytes + payload)


def model_from_bytes(raw: bytes, dtype=np.float32):
    if len(raw) < 12:
        raise Truncated("checkpoint shorter than header")
    if raw[:4] != CKPT_MAGIC:
        raise BadMagic(f"bad checkpoint magic {raw[:4]!r}")
    version, desc_len = struct.unpack_from("<II", raw, 4)
    if version != CKPT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}")
    desc = json.loads(raw[12 : 12 + desc_len].decode("utf-8"))
    model = build_model(desc, dtype=dtype)
    off = 12 + desc_len
    for name, t in model.parameters():
        n = t.data.size
        chunk = raw[off : off + 4 * n]
        if len(chunk) != 4 * n:
            raise Truncated(f"checkpoint payload ends inside {name}")
        t.data = np.frombuffer(chunk, dtype="<f4").reshape(t.data.shape).astype(dtype)
        off += 4 * n
    if off != len(raw):
        raise Truncated(f"{len(raw) - off} trailing bytes after parameters")
    return model, desc


def save_checkpoint(model, path, extra: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(model_state_bytes(model, extra))


def load_checkpoint(path, dtype=np.float32):
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read(), dtype=dtype)


def zero_grads(model) -> None:
    for _, t in model.parameters():
        t.grad = None
