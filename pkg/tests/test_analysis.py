import csv

import numpy as np
import pytest

from covspeech.analysis import AttentionTrace, collect_attention, export_trace
from covspeech.audio_io import WavClip
from covspeech.errors import ArchitectureMismatch, LengthMismatch
from covspeech.model import CnnSapModel, HeadModel, model_from_bytes, model_state_bytes
from covspeech.spectral import spectrogram_257


def _head_models(n, seed0=0, **kwargs):
    defaults = dict(in_dim=6, k=8, pooling="sap")
    defaults.update(kwargs)
    return [HeadModel(seed=seed0 + i, **defaults) for i in range(n)]


def _feats(t=30, d=6, seed=0):
    return np.random.default_rng(seed).normal(size=(t, d)).astype(np.float32)


class TestCollect:
    def test_trace_sums_to_one(self):
        trace = collect_attention(_head_models(5), _feats())
        assert trace.weights.sum() == pytest.approx(1.0, abs=1e-6)
        assert np.all(trace.weights >= 0)
        assert trace.n_trials_averaged == 5

    def test_identical_checkpoints_equal_single_model(self):
        model = _head_models(1, seed0=3)[0]
        clones = [model_from_bytes(model_state_bytes(model))[0] for _ in range(5)]
        feats = _feats(seed=3)
        _, alpha = model.forward(feats)
        trace = collect_attention(clones, feats)
        assert np.allclose(trace.weights, alpha / alpha.sum(), atol=1e-7)

    def test_checkpoint_order_commutes(self):
        models = _head_models(4, seed0=5)
        feats = _feats(seed=5)
        fwd = collect_attention(models, feats).weights
        rev = collect_attention(models[::-1], feats).weights
        assert np.allclose(fwd, rev, atol=1e-12)

    def test_mean_of_simplex_stays_on_simplex(self):
        models = _head_models(3, seed0=7)
        feats = _feats(seed=7)
        stacked = []
        for m in models:
            _, alpha = m.forward(feats)
            stacked.append(alpha)
        raw_mean = np.mean(stacked, axis=0)
        assert raw_mean.sum() == pytest.approx(1.0, abs=1e-6)
        trace = collect_attention(models, feats)
        assert abs(trace.weights.sum() - raw_mean.sum()) < 1e-6

    def test_cnn_upsampling_preserves_mass_and_length(self):
        models = [CnnSapModel(in_dim=9, channels=6, seed=s) for s in range(2)]
        spec = np.random.default_rng(1).normal(size=(23, 9)).astype(np.float32)
        trace = collect_attention(models, spec)
        # floor(23/5)=4 pooled frames, upsampled x5
        assert len(trace.weights) == 20
        assert trace.weights.sum() == pytest.approx(1.0, abs=1e-6)
        # each pooled weight spread evenly over its 5 frames
        blocks = trace.weights.reshape(4, 5)
        assert np.allclose(blocks, blocks[:, :1], atol=1e-12)

    def test_time_axis_on_10ms_grid(self):
        trace = collect_attention(_head_models(2), _feats(t=12))
        assert np.allclose(np.diff(trace.time_axis_s), 0.01, atol=1e-12)

    def test_architecture_mismatch(self):
        mixed = _head_models(1) + [HeadModel(in_dim=6, k=16, pooling="sap", seed=9)]
        with pytest.raises(ArchitectureMismatch):
            collect_attention(mixed, _feats())

    def test_mean_pooling_rejected(self):
        models = _head_models(2, pooling="mean")
        with pytest.raises(ArchitectureMismatch):
            collect_attention(models, _feats())

    def test_no_checkpoints_rejected(self):
        with pytest.raises(ArchitectureMismatch):
            collect_attention([], _feats())


class TestExport:
    def _clip_and_spec(self, n=16000, seed=0):
        rng = np.random.default_rng(seed)
        clip = WavClip(np.clip(rng.normal(0, 0.2, n), -1, 1).astype(np.float32))
        return clip, spectrogram_257(clip)

    def test_csv_rows_match_trace(self, tmp_path):
        clip, spec = self._clip_and_spec()
        models = _head_models(3, in_dim=257, k=8)
        trace = collect_attention(models, spec.data)
        csv_path, png_path = export_trace(trace, spec, tmp_path)
        with open(csv_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 98
        total = sum(float(r["weight"]) for r in rows)
        assert total == pytest.approx(1.0, abs=1e-6)
        assert (tmp_path / png_path.split("/")[-1]).exists()
        assert open(png_path, "rb").read(8).startswith(b"\x89PNG")

    def test_cnn_trace_trimmed_within_tolerance(self, tmp_path):
        clip, spec = self._clip_and_spec(seed=1)
        models = [CnnSapModel(seed=s) for s in range(2)]
        trace = collect_attention(models, spec.data)
        # 98 -> 19 pooled -> 95 upsampled: 3 frames short, within tolerance
        assert len(trace.weights) == 95
        csv_path, _ = export_trace(trace, spec, tmp_path)
        with open(csv_path) as fh:
            assert len(list(csv.DictReader(fh))) == 95

    def test_length_mismatch_rejected(self, tmp_path):
        clip, spec = self._clip_and_spec(seed=2)
        trace = AttentionTrace("x", np.arange(50) * 0.01, np.full(50, 1 / 50), 1)
        with pytest.raises(LengthMismatch):
            export_trace(trace, spec, tmp_path)

    def test_image_time_extent(self, tmp_path):
        clip, spec = self._clip_and_spec(seed=3)
        models = _head_models(2, in_dim=257, k=8)
        trace = collect_attention(models, spec.data)
        assert trace.time_axis_s[-1] == pytest.approx(clip.duration_s, abs=0.035)
