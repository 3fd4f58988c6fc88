"""Forward/backward passes for the two layer types the screening nets use.

A "conv unit" is convolution + batch normalization + ReLU.  Forward passes
are pure; the returned cache carries what backward needs.  Backward is only
defined for train-mode caches.  Per-channel reductions run in float64 and
are narrowed back to the storage dtype.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ContractError
from . import kernels

REDUCE = {"axis": (0, 2, 3), "dtype": np.float64}


def _require(cond, msg):
    if not cond:
        raise ContractError(msg)


@dataclass
class ConvUnitParams:
    weights: np.ndarray            # (out_ch, in_ch, kh, kw)
    bias: np.ndarray               # (out_ch,)
    bn_gamma: np.ndarray           # (out_ch,)
    bn_beta: np.ndarray            # (out_ch,)
    bn_running_mean: np.ndarray    # (out_ch,)
    bn_running_var: np.ndarray     # (out_ch,), strictly positive
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.9
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        _require(self.weights.ndim == 4, "conv weights must be 4-d (out,in,kh,kw)")
        out_ch = self.weights.shape[0]
        for name in ("bias", "bn_gamma", "bn_beta", "bn_running_mean", "bn_running_var"):
            arr = getattr(self, name)
            _require(arr.shape == (out_ch,), f"{name} must have shape ({out_ch},) to match out channels")
        _require(self.bn_epsilon > 0, "bn_epsilon must be > 0")
        _require(0.0 <= self.bn_momentum <= 1.0, "bn_momentum must lie in [0,1]")
        _require(np.all(self.bn_running_var > 0), "bn_running_var entries must be strictly positive")
        _require(self.stride >= 1, "stride must be a positive integer")
        _require(self.padding >= 0, "padding must be non-negative")


@dataclass
class LinearParams:
    weights: np.ndarray            # (out_features, in_features)
    bias: np.ndarray               # (out_features,)

    def __post_init__(self):
        _require(self.weights.ndim == 2, "linear weights must be 2-d (out,in)")
        _require(self.bias.shape == (self.weights.shape[0],),
                 "linear bias length must equal out features")


@dataclass
class ConvUnitCache:
    x: np.ndarray
    params: ConvUnitParams
    mode: str
    centered: np.ndarray           # conv output minus the mean used
    inv_std: np.ndarray            # float64, per channel
    norm: np.ndarray
    relu_mask: np.ndarray
    m: int                         # batch * height * width


@dataclass
class LinearCache:
    x: np.ndarray
    params: LinearParams


def conv_unit_forward(x, params: ConvUnitParams, mode: str = "train",
                      update_running: bool = True):
    """Conv + batch norm + ReLU.  Returns (output, cache).

    Train mode normalizes with batch statistics and (unless suppressed)
    folds them into the running estimates; infer mode uses the running
    estimates only.
    """
    _require(mode in ("train", "infer"), f"unknown mode {mode!r}")
    x = np.ascontiguousarray(x)
    _require(x.ndim == 4, "input must be 4-d (batch, channel, height, width)")
    n, c, h, w = x.shape
    _require(n >= 1, "batch axis must be non-empty")
    _require(c == params.weights.shape[1],
             f"channel axis mismatch: input has {c}, weights expect {params.weights.shape[1]}")
    kh, kw = params.weights.shape[2], params.weights.shape[3]
    _require(h + 2 * params.padding >= kh, "height axis too small for kernel/padding")
    _require(w + 2 * params.padding >= kw, "width axis too small for kernel/padding")
    _require(np.all(np.isfinite(x)), "input contains non-finite values")

    conv = kernels.conv2d_forward(x, params.weights, params.bias,
                                  params.stride, params.padding)
    dtype = conv.dtype
    if mode == "train":
        mean64 = conv.mean(**REDUCE)
        centered = conv - mean64.astype(dtype)[None, :, None, None]
        var64 = np.mean(centered.astype(np.float64) ** 2, axis=(0, 2, 3))
        if update_running:
            mom = params.bn_momentum
            params.bn_running_mean[...] = (mom * params.bn_running_mean
                                           + (1 - mom) * mean64).astype(params.bn_running_mean.dtype)
            params.bn_running_var[...] = (mom * params.bn_running_var
                                          + (1 - mom) * var64).astype(params.bn_running_var.dtype)
    else:
        mean64 = params.bn_running_mean.astype(np.float64)
        var64 = params.bn_running_var.astype(np.float64)
        centered = conv - mean64.astype(dtype)[None, :, None, None]

    inv_std = 1.0 / np.sqrt(var64 + params.bn_epsilon)
    norm = centered * inv_std.astype(dtype)[None, :, None, None]
    bn_out = (params.bn_gamma[None, :, None, None] * norm
              + params.bn_beta[None, :, None, None])
    relu_mask = bn_out > 0
    out = np.where(relu_mask, bn_out, dtype.type(0))

    cache = ConvUnitCache(x=x, params=params, mode=mode, centered=centered,
                          inv_std=inv_std, norm=norm, relu_mask=relu_mask,
                          m=n * conv.shape[2] * conv.shape[3])
    return out, cache


def conv_unit_backward(gy, cache: ConvUnitCache):
    """Gradients w.r.t. the unit input and parameters.

    Batch statistics are treated as functions of the input (full backprop
    through mean and variance); running statistics get no gradient.
    """
    _require(cache.mode == "train", "backward requires a train-mode cache")
    gy = np.ascontiguousarray(gy)
    _require(gy.shape == cache.norm.shape,
             f"upstream gradient shape {gy.shape} does not match forward output {cache.norm.shape}")
    params = cache.params
    dtype = cache.norm.dtype
    m = cache.m

    g = np.where(cache.relu_mask, gy, dtype.type(0))
    dbeta = g.sum(**REDUCE)
    dgamma = (g * cache.norm).sum(**REDUCE)
    dnorm = g * params.bn_gamma[None, :, None, None]

    inv_std = cache.inv_std                      # float64 (C,)
    dvar = (dnorm * cache.centered).sum(**REDUCE) * (-0.5) * inv_std ** 3
    sum_dnorm = dnorm.sum(**REDUCE)
    sum_centered = cache.centered.sum(**REDUCE)
    dmean = -sum_dnorm * inv_std + dvar * (-2.0 / m) * sum_centered

    dconv = (dnorm * inv_std.astype(dtype)[None, :, None, None]
             + cache.centered * (2.0 / m * dvar).astype(dtype)[None, :, None, None]
             + (dmean / m).astype(dtype)[None, :, None, None])

    gx, gw, gb = kernels.conv2d_backward(dconv.astype(dtype), cache.x,
                                         params.weights, params.stride, params.padding)
    grads = {
        "weights": gw,
        "bias": gb,
        "bn_gamma": dgamma.astype(dtype),
        "bn_beta": dbeta.astype(dtype),
    }
    return gx, grads


def linear_forward(x, params: LinearParams):
    """Affine map: output = x @ weights.T + bias.  Returns (output, cache)."""
    x = np.ascontiguousarray(x)
    _require(x.ndim == 2, "input must be 2-d (batch, features)")
    _require(x.shape[0] >= 1, "batch axis must be non-empty")
    _require(x.shape[1] == params.weights.shape[1],
             f"feature axis mismatch: input has {x.shape[1]}, weights expect {params.weights.shape[1]}")
    out = x @ params.weights.T + params.bias
    return out, LinearCache(x=x, params=params)


def linear_backward(gy, cache: LinearCache):
    gy = np.ascontiguousarray(gy)
    exp_shape = (cache.x.shape[0], cache.params.weights.shape[0])
    _require(gy.shape == exp_shape,
             f"upstream gradient shape {gy.shape} does not match forward output {exp_shape}")
    gx = gy @ cache.params.weights
    gw = gy.T @ cache.x
    gb = gy.sum(axis=0, dtype=np.float64).astype(gy.dtype)
    return gx, {"weights": gw, "bias": gb}
