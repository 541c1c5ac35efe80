import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covspeech.errors import BadMagic, DimMismatch, NonFiniteValue, Truncated, VersionMismatch
from covspeech.interchange import (
    MAGIC,
    TAG_DIMS,
    FeatureMatrix,
    read_feat,
    register_tag,
    write_feat,
    write_sidecar,
)


def _matrix(t=4, d=3, tag="", seed=0):
    rng = np.random.default_rng(seed)
    return FeatureMatrix(rng.normal(size=(t, d)).astype(np.float32), 10.0, tag)


class TestFormat:
    def test_header_layout(self, tmp_path):
        path = tmp_path / "m.feat"
        write_feat(_matrix(2, 3), path)
        raw = path.read_bytes()
        assert raw[:4] == MAGIC == b"FEAT"
        version, t, d = struct.unpack_from("<III", raw, 4)
        shift, tag_len = struct.unpack_from("<fB", raw, 16)
        assert (version, t, d, shift, tag_len) == (1, 2, 3, 10.0, 0)
        # payload section is exactly T*d*4 bytes
        assert len(raw) - 21 - tag_len == 24

    def test_roundtrip_bit_exact(self, tmp_path):
        m = _matrix(7, 5, seed=3)
        path = tmp_path / "m.feat"
        write_feat(m, path)
        back = read_feat(path)
        assert back.data.dtype == np.float32
        assert np.array_equal(back.data, m.data)
        assert back.frame_shift_ms == m.frame_shift_ms
        assert back.source_tag == m.source_tag

    @given(t=st.integers(1, 40), d=st.integers(1, 40), seed=st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_property(self, tmp_path_factory, t, d, seed):
        path = tmp_path_factory.mktemp("feat") / "m.feat"
        m = _matrix(t, d, seed=seed)
        write_feat(m, path)
        assert np.array_equal(read_feat(path).data, m.data)

    def test_nan_rejected(self, tmp_path):
        data = np.zeros((2, 2), dtype=np.float32)
        data[0, 0] = np.nan
        with pytest.raises(NonFiniteValue):
            FeatureMatrix(data, 10.0, "")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.feat"
        write_feat(_matrix(), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(BadMagic):
            read_feat(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "m.feat"
        write_feat(_matrix(), path)
        raw = bytearray(path.read_bytes())
        struct.pack_into("<I", raw, 4, 99)
        path.write_bytes(bytes(raw))
        with pytest.raises(VersionMismatch):
            read_feat(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "m.feat"
        write_feat(_matrix(), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(Truncated):
            read_feat(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "m.feat"
        write_feat(_matrix(), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(Truncated):
            read_feat(path)


class TestRegistry:
    def test_registered_tag_accepted(self, tmp_path):
        path = tmp_path / "m.feat"
        write_feat(_matrix(3, 768, tag="tera"), path)
        assert read_feat(path).dim == 768

    def test_registered_tag_wrong_dim_rejected(self):
        with pytest.raises(DimMismatch):
            _matrix(3, 300, tag="cpc")

    def test_registry_contents(self):
        assert TAG_DIMS["spectrogram"] == 257
        assert TAG_DIMS["mel"] == 80
        assert TAG_DIMS["mfcc"] == 39
        assert TAG_DIMS["fbank"] == 240
        assert TAG_DIMS["cpc"] == TAG_DIMS["pase+"] == 256
        assert TAG_DIMS["tera"] == TAG_DIMS["mockingjay"] == 768

    def test_unregistered_tag_warns(self):
        with pytest.warns(UserWarning, match="unregistered"):
            _matrix(3, 7, tag="mystery")

    def test_register_extends(self):
        register_tag("mystery2", 7)
        try:
            m = _matrix(3, 7, tag="mystery2")
            assert m.dim == 7
            with pytest.raises(DimMismatch):
                _matrix(3, 8, tag="mystery2")
        finally:
            TAG_DIMS.pop("mystery2", None)


def test_sidecar(tmp_path):
    path = tmp_path / "m.feat"
    write_feat(_matrix(), path)
    sidecar = write_sidecar(path, {"source_wav": "x.wav"})
    assert sidecar.endswith(".feat.json")
    import json

    assert json.loads(open(sidecar).read())["source_wav"] == "x.wav"
