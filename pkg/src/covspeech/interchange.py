"""Binary container for frame-feature matrices.

The ``.feat`` format decouples feature extractors (native spectral ones or
external self-supervised exporters) from the classifiers. Layout, all
little-endian:

    magic  "FEAT"          4 bytes
    version                u32 (currently 1)
    n_frames T             u32
    dim d                  u32
    frame_shift_ms         f32
    tag length             u8
    tag                    ascii bytes
    payload                T*d float32, row-major

The format is normative and documented in ``docs/feat-format.md``. An
optional JSON sidecar (same path with ``.json``) carries provenance.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, DimMismatch, NonFiniteValue, Truncated, VersionMismatch

MAGIC = b"FEAT"
VERSION = 1

# Registered feature tags and their mandatory widths. Extendable at runtime
# via register_tag(); unknown tags are accepted with a warning.
TAG_DIMS: dict[str, int] = {
    "spectrogram": 257,
    "mel": 80,
    "mfcc": 39,
    "fbank": 240,
    "cpc": 256,
    "pase+": 256,
    "tera": 768,
    "mockingjay": 768,
}


def register_tag(tag: str, dim: int) -> None:
    TAG_DIMS[tag] = int(dim)


@dataclass
class FeatureMatrix:
    """A (T, d) frame-feature matrix with its grid metadata."""

    data: np.ndarray
    frame_shift_ms: float = 10.0
    source_tag: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise DimMismatch(f"expected 2-D data, got shape {self.data.shape}")
        self.validate()

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def validate(self) -> None:
        t, d = self.data.shape
        if t < 1 or d < 1:
            raise DimMismatch(f"degenerate matrix {t}x{d}")
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteValue(f"non-finite value in {self.source_tag or 'matrix'}")
        expected = TAG_DIMS.get(self.source_tag)
        if expected is None:
            if self.source_tag:
                warnings.warn(
                    f"unregistered feature tag {self.source_tag!r}: dim check skipped",
                    stacklevel=3,
                )
        elif d != expected:
            raise DimMismatch(
                f"tag {self.source_tag!r} requires dim {expected}, got {d}"
            )


def write_feat(m: FeatureMatrix, path) -> None:
    m.validate()
    tag = m.source_tag.encode("ascii")
    if len(tag) > 255:
        raise DimMismatch("tag longer than 255 bytes")
    t, d = m.data.shape
    header = struct.pack("<4sIIIfB", MAGIC, VERSION, t, d, float(m.frame_shift_ms), len(tag))
    payload = np.ascontiguousarray(m.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(tag)
        fh.write(payload)


def read_feat(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    head_fmt = "<4sIIIfB"
    head_size = struct.calcsize(head_fmt)
    if len(raw) < head_size:
        raise Truncated(f"{path}: file shorter than header")
    magic, version, t, d, shift, tag_len = struct.unpack_from(head_fmt, raw)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, reader supports {VERSION}")
    off = head_size
    if len(raw) < off + tag_len:
        raise Truncated(f"{path}: truncated tag")
    tag = raw[off : off + tag_len].decode("ascii")
    off += tag_len
    expected_bytes = t * d * 4
    if len(raw) - off != expected_bytes:
        raise Truncated(
            f"{path}: payload holds {len(raw) - off} bytes, header declares {expected_bytes}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=t * d, offset=off).reshape(t, d)
    return FeatureMatrix(data=data.copy(), frame_shift_ms=shift, source_tag=tag)


def write_sidecar(feat_path, provenance: dict) -> str:
    """Write the optional JSON provenance sidecar next to a .feat file."""
    sidecar = str(feat_path) + ".json"
    with open(sidecar, "w") as fh:
        json.dump(provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
