"""Pure-numpy conv kernels (im2col), the fallback when the compiled core is absent.

Shapes follow the (batch, channel, height, width) layout used everywhere in
this package.  Both float32 and float64 are supported and preserved.
"""

import numpy as np

NAME = "numpy-im2col"


def _out_dims(h, w, kh, kw, stride, pad):
    return (h + 2 * pad - kh) // stride + 1, (w + 2 * pad - kw) // stride + 1


def _im2col(x, kh, kw, stride, pad, oh, ow):
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = x[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride]
    # (N*oh*ow, C*kh*kw)
    return cols.transpose(0, 4, 5, 1, 2, 3).reshape(n * oh * ow, c * kh * kw)


def _col2im(cols, x_shape, kh, kw, stride, pad, oh, ow):
    n, c, h, w = x_shape
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols = cols.reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    for u in range(kh):
        for v in range(kw):
            xp[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride] += cols[:, :, u, v]
    if pad:
        return xp[:, :, pad:pad + h, pad:pad + w]
    return xp


def conv2d_forward(x, w, b, stride, pad):
    x = np.ascontiguousarray(x)
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    oh, ow = _out_dims(h, wd, kh, kw, stride, pad)
    cols = _im2col(x, kh, kw, stride, pad, oh, ow)
    y = cols @ w.reshape(o, -1).T + b
    return np.ascontiguousarray(y.reshape(n, oh, ow, o).transpose(0, 3, 1, 2))


def conv2d_backward(gy, x, w, stride, pad):
    """Gradients of sum(conv2d_forward(x,w,b) * gy) w.r.t. x, w and b."""
    x = np.ascontiguousarray(x)
    gy = np.ascontiguousarray(gy)
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    oh, ow = gy.shape[2], gy.shape[3]
    gym = gy.transpose(0, 2, 3, 1).reshape(n * oh * ow, o)
    cols = _im2col(x, kh, kw, stride, pad, oh, ow)
    gw = (gym.T @ cols).reshape(w.shape)
    gb = gy.sum(axis=(0, 2, 3))
    gcols = gym @ w.reshape(o, -1)
    gx = _col2im(gcols, x.shape, kh, kw, stride, pad, oh, ow)
    return gx, gw, gb
