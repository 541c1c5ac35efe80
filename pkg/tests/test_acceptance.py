"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with -s to see them inline).

Reference values come from the corpus-shaped fixture and the independent
oracles in helpers.py; nothing here shares a code path with the functions
under test.
"""

import functools
import time

import numpy as np
import pytest

from covspeech import tensor as tz
from covspeech.audio_io import WavClip, detect_bandwidth
from covspeech.augment import AugmentSpec, augment_manifest, pitch_randomize
from covspeech.cli import main
from covspeech.dataset import filter_narrowband
from covspeech.errors import DimMismatch
from covspeech.fixture import (
    C19S_PLAN,
    SMALL_PLAN,
    band_detection_set,
    generate_corpus,
    separable_sequences,
)
from covspeech.interchange import FeatureMatrix, read_feat, write_feat
from covspeech.model import (
    CnnSapModel,
    HeadModel,
    PoolingLayer,
    model_from_bytes,
    model_state_bytes,
    pool,
)
from covspeech.spectral import EXTRACTORS
from covspeech.tensor import cross_entropy, finite_diff_check
from covspeech.training import OptimState, TrainConfig, adamw_step, lr_at, train

from helpers import fft_peak_hz, oracle_mfcc39


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] {name}")
                raise
            print(f"[PASS] {name}")

        return wrapper

    return decorate


@criterion("SAP-Mean equivalence (W_c = 0, 100 random matrices, 1e-6)")
def test_sap_mean_equivalence():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        t = int(rng.integers(1, 51))
        k = int(rng.integers(1, 65))
        x = tz.constant(rng.normal(size=(t, k)))
        h_sap, alpha = pool(x, PoolingLayer("sap", tz.parameter(np.zeros(k))))
        h_mean, _ = pool(x, PoolingLayer("mean"))
        assert np.max(np.abs(h_sap.data - h_mean.data)) < 1e-6
        assert np.allclose(alpha.data, 1.0 / t, atol=1e-12)


def _grad_check_models(dtype):
    rng = np.random.default_rng(31)
    models = []
    for pooling in ("mean", "sap"):
        m = HeadModel(in_dim=24, k=32, pooling=pooling, seed=7, dtype=dtype)
        if m.pooling.W_c is not None:
            m.pooling.W_c.data[:] = (0.1 * rng.normal(size=32)).astype(dtype)
        feats = rng.normal(size=(9, 24)).astype(dtype)
        models.append((f"head/{pooling}", m, feats, 1))
    cnn = CnnSapModel(in_dim=13, channels=12, seed=7, dtype=dtype)
    cnn.pooling.W_c.data[:] = (0.1 * rng.normal(size=12)).astype(dtype)
    spec = rng.normal(size=(20, 13)).astype(dtype)
    models.append(("cnn/sap", cnn, spec, 0))
    return models


@criterion("Gradient fidelity (64-bit < 1e-5, 32-bit < 1e-2, < 60 s)")
def test_gradient_fidelity():
    start = time.time()

    # 64-bit: analytic vs central differences on the same graph
    for name, model, feats, label in _grad_check_models(np.float64):
        def loss_fn():
            logits, _ = model.forward(feats, training=False)
            return cross_entropy(logits, label)

        report = finite_diff_check(loss_fn, model.parameters(), eps=1e-5)
        assert report.max_rel_err < 1e-5, (name, report.max_rel_err)

    # 32-bit: analytic gradients from the float32 graph, compared against the
    # float64 central-difference reference (float32 differences of the loss
    # are noise-dominated well above this tolerance)
    pairs = zip(_grad_check_models(np.float32), _grad_check_models(np.float64))
    for (name, m32, feats32, label), (_, m64, feats64, _) in pairs:
        logits, _ = m32.forward(feats32, training=False)
        tz.backward(cross_entropy(logits, label))

        def loss64():
            logits64, _ = m64.forward(feats64, training=False)
            return cross_entropy(logits64, label)

        for (pname, p32), (_, p64) in zip(m32.parameters(), m64.parameters()):
            flat = p64.data.reshape(-1)
            g32 = p32.grad.reshape(-1)
            eps = 1e-5
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = float(loss64().data)
                flat[i] = orig - eps
                f_minus = float(loss64().data)
                flat[i] = orig
                fd = (f_plus - f_minus) / (2 * eps)
                rel = abs(float(g32[i]) - fd) / max(abs(fd), abs(float(g32[i])), 1e-3)
                assert rel < 1e-2, (name, pname, i, rel)

    elapsed = time.time() - start
    assert elapsed < 60.0, f"gradient checks took {elapsed:.1f} s"


@criterion("Feature dimensions (257/80/39/240, shared T, MFCC oracle 1e-4)")
def test_feature_dimensions():
    rng = np.random.default_rng(77)
    expected = {"spectrogram": 257, "mel": 80, "mfcc": 39, "fbank": 240}
    for i in range(10):
        n = int(rng.integers(6000, 20000))
        clip = WavClip(np.clip(rng.normal(0, 0.25, n), -1, 1).astype(np.float32))
        frame_counts = set()
        for kind, fn in EXTRACTORS.items():
            fm = fn(clip)
            assert fm.dim == expected[kind]
            frame_counts.add(fm.n_frames)
        assert len(frame_counts) == 1
        ours = EXTRACTORS["mfcc"](clip).data.astype(np.float64)
        ref = oracle_mfcc39(clip.samples)
        assert np.max(np.abs(ours - ref)) < 1e-4, f"clip {i}"


@criterion("Bandwidth filter (200/200 detection; corpus-shaped counts)")
def test_bandwidth_filter(tmp_path):
    correct = 0
    for clip, truly_narrow in band_detection_set(100, 100, seed=5, duration_s=0.4):
        if detect_bandwidth(clip).is_narrowband == truly_narrow:
            correct += 1
    assert correct == 200

    manifest = generate_corpus(tmp_path / "c19s", seed=8, duration_s=0.4, plan=C19S_PLAN)
    reports = {}
    for e in manifest.entries:
        if e.split != "test":
            from covspeech.audio_io import read_wav

            reports[e.id] = detect_bandwidth(read_wav(e.wav_path))
    filtered = filter_narrowband(manifest, reports)

    train_counts = filtered.class_counts("train")
    dev_counts = filtered.class_counts("dev")
    assert manifest.class_counts("train")["total"] == 315
    assert manifest.class_counts("train")["positive"] == 72
    assert (train_counts["total"], train_counts["positive"]) == (299, 56)
    assert manifest.class_counts("dev")["total"] == 295
    assert manifest.class_counts("dev")["positive"] == 142
    assert (dev_counts["total"], dev_counts["positive"]) == (282, 129)
    assert filtered.class_counts("test")["total"] == 283


@criterion("Schedule & optimizer (CNN anchors; AdamW scalar within 1e-12)")
def test_schedule_and_optimizer():
    cfg = TrainConfig()
    assert lr_at(0, cfg, "cnn") == 0.0
    assert lr_at(1400, cfg, "cnn") == pytest.approx(2e-4, rel=1e-12)
    assert lr_at(5700, cfg, "cnn") == pytest.approx(1e-4, rel=1e-12)
    assert lr_at(10000, cfg, "cnn") == 0.0

    p = np.array([1.0])
    state = OptimState(m=[np.zeros(1)], v=[np.zeros(1)], weight_decay=0.0)
    adamw_step([p], [np.array([1.0])], state, lr=0.1)
    hand = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8))
    assert abs(p[0] - hand) < 1e-12


@criterion("Learning sanity (separable task UAR >= 0.95 in 2000 steps; ln 2 start)")
def test_learning_sanity():
    start = time.time()
    train_items, dev_items = separable_sequences(64, 64, dim=8, seed=5)
    model = HeadModel(in_dim=8, k=128, pooling="sap", seed=5)
    cfg = TrainConfig(total_steps=2000, eval_every=200, batch_size=8, seed=5)
    result = train(model, train_items, dev_items, cfg)
    assert result.first_batch_loss == pytest.approx(np.log(2), abs=0.2)
    assert result.best_uar >= 0.95
    assert time.time() - start < 300.0


@criterion("Determinism (two CLI train runs bit-identical)")
def test_determinism(tmp_path):
    corpus = tmp_path / "corpus"
    assert main(["fixture", "generate", "--out", str(corpus), "--seed", "3",
                 "--small", "--duration", "0.4"]) == 0
    feats = tmp_path / "feats"
    assert main(["features", "extract", "--type", "fbank",
                 "--in", str(corpus / "wav"), "--out", str(feats)]) == 0

    artifacts = []
    for name in ("run1", "run2"):
        ckpt = tmp_path / f"{name}.ckpt"
        history = tmp_path / f"{name}.history.csv"
        assert main(["train", "--feature", "fbank", "--pooling", "sap",
                     "--k", "128", "--family", "head", "--seed", "17",
                     "--manifest", str(corpus / "manifest.csv"),
                     "--features-dir", str(feats), "--out", str(ckpt),
                     "--history", str(history),
                     "--steps", "40", "--eval-every", "10",
                     "--batch-size", "4"]) == 0
        artifacts.append((ckpt.read_bytes(), history.read_bytes()))
    assert artifacts[0][0] == artifacts[1][0], "checkpoints differ"
    assert artifacts[0][1] == artifacts[1][1], "history CSVs differ"


@criterion("Interchange (1000 matrix roundtrips bit-exact; registry enforced)")
def test_interchange_roundtrip(tmp_path):
    rng = np.random.default_rng(99)
    path = tmp_path / "m.feat"
    for _ in range(1000):
        t = int(rng.integers(1, 24))
        d = int(rng.integers(1, 24))
        m = FeatureMatrix(rng.normal(size=(t, d)).astype(np.float32), 10.0, "")
        write_feat(m, path)
        back = read_feat(path)
        assert np.array_equal(back.data, m.data)
        assert back.frame_shift_ms == m.frame_shift_ms
    with pytest.raises(DimMismatch):
        FeatureMatrix(np.zeros((3, 300), dtype=np.float32), 10.0, "cpc")


@criterion("Augmentation (train doubled, labels kept; +1200 cents -> 880 Hz)")
def test_augmentation(tmp_path, tone_440):
    manifest = generate_corpus(tmp_path / "c", seed=6, duration_s=0.4, plan=SMALL_PLAN)
    n_train = len(manifest.split_entries("train"))
    n_dev = len(manifest.split_entries("dev"))
    n_test = len(manifest.split_entries("test"))
    out = augment_manifest(manifest, AugmentSpec(seed=4), tmp_path / "aug")
    assert len(out.split_entries("train")) == 2 * n_train
    assert len(out.split_entries("dev")) == n_dev
    assert len(out.split_entries("test")) == n_test
    by_id = manifest.by_id()
    for e in out.split_entries("train"):
        if e.id.endswith("__aug"):
            assert e.label == by_id[e.id.removesuffix("__aug")].label

    shifted = pitch_randomize(tone_440, 1200.0)
    bin_hz = 16000 / len(shifted.samples)
    assert abs(fft_peak_hz(shifted.samples) - 880.0) <= bin_hz + 1e-9


@criterion("Attention traces (sum 1; identical-trial mean; CNN mass kept)")
def test_attention_traces():
    from covspeech.analysis import collect_attention

    rng = np.random.default_rng(13)
    feats = rng.normal(size=(31, 10)).astype(np.float32)
    models = [HeadModel(in_dim=10, k=16, pooling="sap", seed=s) for s in range(5)]
    trace = collect_attention(models, feats)
    assert trace.weights.sum() == pytest.approx(1.0, abs=1e-6)

    base = HeadModel(in_dim=10, k=16, pooling="sap", seed=9)
    clones = [model_from_bytes(model_state_bytes(base))[0] for _ in range(5)]
    _, alpha = base.forward(feats)
    trace5 = collect_attention(clones, feats)
    assert np.allclose(trace5.weights, alpha / alpha.sum(), atol=1e-7)

    cnn_models = [CnnSapModel(in_dim=11, channels=8, seed=s) for s in range(2)]
    spec = rng.normal(size=(37, 11)).astype(np.float32)
    raw_sums = []
    for m in cnn_models:
        _, a = m.forward(spec)
        raw_sums.append(a.sum())
    cnn_trace = collect_attention(cnn_models, spec)
    assert len(cnn_trace.weights) == 35  # floor(37/5) * 5
    assert cnn_trace.weights.sum() == pytest.approx(1.0, abs=1e-6)
    assert np.mean(raw_sums) == pytest.approx(1.0, abs=1e-6)
