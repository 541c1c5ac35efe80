"""Kernel backend selection.

Prefers the compiled Cython extension when it imported cleanly; otherwise
falls back to the NumPy implementation. Set ``COVSPEECH_PURE=1`` to force
the fallback (useful for benchmarking, see ``benchmarks/bench_kernels.py``).
"""

import os

if os.environ.get("COVSPEECH_PURE"):
    from . import _nk as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _ck as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _nk as _impl

        BACKEND = "numpy"

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
