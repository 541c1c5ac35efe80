"""Benchmark the compiled conv1d kernels against the NumPy fallback.

Run:  python benchmarks/bench_kernels.py

Shapes mirror the CNN family's real workload: 257 spectrogram bins in, 160
channels, kernel 5, on front-pooled utterances of varying length, at the
training dtype (float32). Also times one full forward+backward of each model
family through the autodiff layer under both backends (select with
COVSPEECH_PURE=1 when re-running by hand).
"""

import time

import numpy as np

from covspeech._kernels import _nk

try:
    from covspeech._kernels import _ck
except ImportError:
    _ck = None


def _time(fn, repeat=30):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_conv(c_in, c_out, length, dtype=np.float32):
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.normal(size=(c_in, length)).astype(dtype))
    w = np.ascontiguousarray(rng.normal(size=(c_out, c_in, 5)).astype(dtype))
    gy = np.ascontiguousarray(rng.normal(size=(c_out, length)).astype(dtype))

    rows = []
    t_np_f = _time(lambda: _nk.conv1d_forward(x, w, 1, 2))
    t_np_b = _time(lambda: _nk.conv1d_backward(x, w, gy, 1, 2))
    rows.append(("numpy", t_np_f, t_np_b))
    if _ck is not None:
        y_np = _nk.conv1d_forward(x, w, 1, 2)
        y_ck = _ck.conv1d_forward(x, w, 1, 2)
        assert np.allclose(y_np, y_ck, atol=1e-3), "backends disagree"
        t_ck_f = _time(lambda: _ck.conv1d_forward(x, w, 1, 2))
        t_ck_b = _time(lambda: _ck.conv1d_backward(x, w, gy, 1, 2))
        rows.append(("cython", t_ck_f, t_ck_b))

    print(f"\nconv1d {c_in}->{c_out} k=5 L={length} ({np.dtype(dtype).name})")
    for name, tf, tb in rows:
        print(f"  {name:6s} forward {tf * 1e3:8.3f} ms   backward {tb * 1e3:8.3f} ms")
    if _ck is not None:
        print(f"  speedup forward x{t_np_f / t_ck_f:.2f}   backward x{t_np_b / t_ck_b:.2f}")


def bench_models():
    from covspeech import tensor as tz
    from covspeech._kernels import BACKEND
    from covspeech.model import CnnSapModel, HeadModel

    rng = np.random.default_rng(1)
    head = HeadModel(in_dim=240, k=256, pooling="sap", seed=0)
    feats = rng.normal(size=(300, 240)).astype(np.float32)
    cnn = CnnSapModel(seed=0)
    spec = rng.normal(size=(300, 257)).astype(np.float32)

    def step(model, x):
        logits, _ = model.forward(x, training=False)
        tz.backward(tz.cross_entropy(logits, 1))
        for _, p in model.parameters():
            p.grad = None

    print(f"\nfull forward+backward, active backend: {BACKEND}")
    print(f"  head (240->256, SAP, T=300)  {_time(lambda: step(head, feats), 10) * 1e3:8.2f} ms")
    print(f"  cnn  (257ch, 160ch x3, T=300){_time(lambda: step(cnn, spec), 10) * 1e3:8.2f} ms")


if __name__ == "__main__":
    for length in (20, 60, 100, 500):
        bench_conv(257, 160, length)
    bench_conv(160, 160, 100)
    bench_models()
