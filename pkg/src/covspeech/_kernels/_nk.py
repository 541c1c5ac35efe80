"""NumPy fallback for the compiled kernels.

Same contracts as ``_ck``: conv1d works on (channels, length) arrays with the
kernel laid out as (out_channels, in_channels, width). The forward pass uses
an im2col view plus BLAS; the backward pass reduces to one small matmul per
kernel tap. Reduction order is fixed, so results are deterministic.
"""

import numpy as np


def _pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (pad, pad)))


def _col_view(xp, width, stride, l_out):
    # (C, L_out, width) sliding view of the padded input
    s0, s1 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, (xp.shape[0], l_out, width), (s0, stride * s1, s1), writeable=False
    )


def conv1d_forward(x, w, stride, pad):
    c_out, c_in, width = w.shape
    xp = _pad(x, pad)
    l_out = (xp.shape[1] - width) // stride + 1
    cols = _col_view(xp, width, stride, l_out)
    # y[o, t] = sum_{c, j} w[o, c, j] * xp[c, t*stride + j]
    return np.tensordot(w, cols, axes=([1, 2], [0, 2]))


def conv1d_backward(x, w, gy, stride, pad):
    c_out, c_in, width = w.shape
    xp = _pad(x, pad)
    l_out = gy.shape[1]
    cols = _col_view(xp, width, stride, l_out)

    # gw[o, c, j] = sum_t gy[o, t] * xp[c, t*stride + j]
    gw = np.tensordot(gy, cols, axes=([1], [1]))
    # gxp[c, t*stride + j] += sum_o gy[o, t] * w[o, c, j], one GEMM per tap
    gxp = np.zeros_like(xp)
    for j in range(width):
        gxp[:, j : j + l_out * stride : stride] += w[:, :, j].T @ gy
    gx = gxp[:, pad : gxp.shape[1] - pad] if pad else gxp
    return np.ascontiguousarray(gx), gw
