# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled conv1d kernels: the hot loop of CNN training.

Layouts match the NumPy fallback in ``_nk``: x is (in_channels, length),
w is (out_channels, in_channels, width), all C-contiguous, float32 or
float64. The work is parallelized over independent output slices (output
channels forward, input channels backward), which keeps the per-element
reduction order fixed, so results are bit-identical for any thread count.
"""

import numpy as np

cimport cython
from cython.parallel cimport prange


ctypedef fused floating:
    float
    double


cdef inline Py_ssize_t _t_lo(Py_ssize_t j, Py_ssize_t pad, Py_ssize_t stride) nogil:
    # smallest t with t*stride + j - pad >= 0
    if j >= pad:
        return 0
    return (pad - j + stride - 1) // stride


cdef inline Py_ssize_t _t_hi(Py_ssize_t j, Py_ssize_t pad, Py_ssize_t stride,
                             Py_ssize_t length, Py_ssize_t l_out) nogil:
    # one past the largest t with t*stride + j - pad < length
    cdef Py_ssize_t hi = (length - 1 - j + pad) // stride + 1
    if hi > l_out:
        hi = l_out
    if hi < 0:
        hi = 0
    return hi


def conv1d_forward(floating[:, ::1] x, floating[:, :, ::1] w, int stride, int pad):
    cdef Py_ssize_t c_out = w.shape[0]
    cdef Py_ssize_t c_in = w.shape[1]
    cdef Py_ssize_t width = w.shape[2]
    cdef Py_ssize_t length = x.shape[1]
    cdef Py_ssize_t l_out = (length + 2 * pad - width) // stride + 1

    dtype = np.float32 if floating is float else np.float64
    y_arr = np.zeros((c_out, l_out), dtype=dtype)
    cdef floating[:, ::1] y = y_arr

    cdef Py_ssize_t o, c, j, t, lo, hi, base
    cdef floating wv
    for o in prange(c_out, nogil=True, schedule="static"):
        for c in range(c_in):
            for j in range(width):
                wv = w[o, c, j]
                if wv == 0:
                    continue
                lo = _t_lo(j, pad, stride)
                hi = _t_hi(j, pad, stride, length, l_out)
                base = j - pad
                if stride == 1:
                    # unit-stride saxpy, vectorizable
                    for t in range(lo, hi):
                        y[o, t] += wv * x[c, t + base]
                else:
                    for t in range(lo, hi):
                        y[o, t] += wv * x[c, t * stride + base]
    return y_arr


def conv1d_backward(floating[:, ::1] x, floating[:, :, ::1] w,
                    floating[:, ::1] gy, int stride, int pad):
    cdef Py_ssize_t c_out = w.shape[0]
    cdef Py_ssize_t c_in = w.shape[1]
    cdef Py_ssize_t width = w.shape[2]
    cdef Py_ssize_t length = x.shape[1]
    cdef Py_ssize_t l_out = gy.shape[1]

    dtype = np.float32 if floating is float else np.float64
    gx_arr = np.zeros((c_in, length), dtype=dtype)
    gw_arr = np.zeros((c_out, c_in, width), dtype=dtype)
    cdef floating[:, ::1] gx = gx_arr
    cdef floating[:, :, ::1] gw = gw_arr

    cdef Py_ssize_t o, c, j, t, lo, hi, base
    cdef floating wv, acc
    for c in prange(c_in, nogil=True, schedule="static"):
        for o in range(c_out):
            for j in range(width):
                wv = w[o, c, j]
                lo = _t_lo(j, pad, stride)
                hi = _t_hi(j, pad, stride, length, l_out)
                base = j - pad
                acc = 0
                if stride == 1:
                    # split reduction and saxpy so both vectorize
                    for t in range(lo, hi):
                        acc = acc + gy[o, t] * x[c, t + base]
                    for t in range(lo, hi):
                        gx[c, t + base] += gy[o, t] * wv
                else:
                    for t in range(lo, hi):
                        acc = acc + gy[o, t] * x[c, t * stride + base]
                        gx[c, t * stride + base] += gy[o, t] * wv
                gw[o, c, j] = gw[o, c, j] + acc
    return gx_arr, gw_arr
