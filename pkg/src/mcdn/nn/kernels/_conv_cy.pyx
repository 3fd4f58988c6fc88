# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled direct-loop conv kernels, the hot core of stream training.

Same contract as the numpy fallback: (N, C, H, W) layout, float32 or
float64 in and out.  Accumulation runs in double either way.
"""

import numpy as np

ctypedef fused floating:
    float
    double


def conv2d_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                   floating[::1] b, int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t o = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * pad - kw) // stride + 1
    dtype = np.float32 if floating is float else np.float64
    y_np = np.empty((n, o, oh, ow), dtype=dtype)
    cdef floating[:, :, :, ::1] y = y_np
    cdef Py_ssize_t i, oc, r, q, ic, u, v, rr, cc
    cdef double acc
    with nogil:
        for i in range(n):
            for oc in range(o):
                for r in range(oh):
                    for q in range(ow):
                        acc = b[oc]
                        for ic in range(c):
                            for u in range(kh):
                                rr = r * stride + u - pad
                                if rr < 0 or rr >= h:
                                    continue
                                for v in range(kw):
                                    cc = q * stride + v - pad
                                    if cc < 0 or cc >= wd:
                                        continue
                                    acc += x[i, ic, rr, cc] * w[oc, ic, u, v]
                        y[i, oc, r, q] = <floating> acc
    return y_np


def conv2d_backward(floating[:, :, :, ::1] gy, floating[:, :, :, ::1] x,
                    floating[:, :, :, ::1] w, int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t o = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = gy.shape[2], ow = gy.shape[3]
    dtype = np.float32 if floating is float else np.float64
    gx_np = np.zeros((n, c, h, wd), dtype=dtype)
    gw_np = np.zeros((o, c, kh, kw), dtype=np.float64)
    gb_np = np.zeros(o, dtype=np.float64)
    cdef floating[:, :, :, ::1] gx = gx_np
    cdef double[:, :, :, ::1] gw = gw_np
    cdef double[::1] gb = gb_np
    cdef Py_ssize_t i, oc, r, q, ic, u, v, rr, cc
    cdef double g
    with nogil:
        for i in range(n):
            for oc in range(o):
                for r in range(oh):
                    for q in range(ow):
                        g = gy[i, oc, r, q]
                        gb[oc] += g
                        for ic in range(c):
                            for u in range(kh):
                                rr = r * stride + u - pad
                                if rr < 0 or rr >= h:
                                    continue
                                for v in range(kw):
                                    cc = q * stride + v - pad
                                    if cc < 0 or cc >= wd:
                                        continue
                                    gw[oc, ic, u, v] += g * x[i, ic, rr, cc]
                                    gx[i, ic, rr, cc] += <floating> (g * w[oc, ic, u, v])
    return gx_np, gw_np.astype(dtype), gb_np.astype(dtype)
