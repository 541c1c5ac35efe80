"""Writer for the `.feat` interchange container.

Independent implementation of the format documented in the consumer's
docs/feat-format.md: magic "FEAT", version 1, T, d, frame shift, tagged
float32 payload, all little-endian.
"""

import json
import struct

import numpy as np

MAGIC = b"FEAT"
VERSION = 1


def write_feat(data: np.ndarray, frame_shift_ms: float, tag: str, path) -> None:
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise ValueError(f"need a (T, d) matrix, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("non-finite value in feature matrix")
    tag_bytes = tag.encode("ascii")
    t, d = data.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIIfB", MAGIC, VERSION, t, d,
                             float(frame_shift_ms), len(tag_bytes)))
        fh.write(tag_bytes)
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def write_sidecar(feat_path, provenance: dict) -> str:
    sidecar = str(feat_path) + ".json"
    with open(sidecar, "w") as fh:
        json.dump(provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
