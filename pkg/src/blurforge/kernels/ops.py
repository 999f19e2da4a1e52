"""Vectorized primitives on single frames laid out as ``(C, H, W)``."""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from blurforge.errors import InputError

LN_EPS = 1e-5


def conv1x1(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Pointwise convolution; ``w`` has shape ``(C_out, C_in)``."""
    if w.shape[1] != x.shape[0]:
        raise InputError(f"conv1x1 expects {w.shape[1]} input channels, got {x.shape[0]}")
    y = np.tensordot(w, x, axes=(1, 0))
    if b is not None:
        y = y + b[:, None, None]
    return y.astype(x.dtype, copy=False)


def dwconv3x3(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Depth-wise 3x3 cross-correlation, zero padding, stride 1; ``w`` is ``(C, 3, 3)``."""
    if w.shape != (x.shape[0], 3, 3):
        raise InputError(f"dwconv3x3 weight shape {w.shape} does not match {x.shape[0]} channels")
    _, h, wd = x.shape
    p = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    y = np.zeros_like(x)
    for dy in range(3):
        for dx in range(3):
            y += w[:, dy, dx, None, None] * p[:, dy:dy + h, dx:dx + wd]
    return y


def layer_norm(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, eps: float = LN_EPS) -> np.ndarray:
    """Normalize over the channel axis at every spatial position.

    Statistics and centering run in float64: with few channels of nearly equal value the
    subtraction of the mean amplifies float32 rounding well past the kernel tolerance.
    """
    x64 = x.astype(np.float64)
    mu = x64.mean(axis=0, keepdims=True)
    var = ((x64 - mu) ** 2).mean(axis=0, keepdims=True)
    out = (x64 - mu) / np.sqrt(var + eps) * weight[:, None, None] + bias[:, None, None]
    return out.astype(np.result_type(x, weight), copy=False)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def gelu(x: np.ndarray) -> np.ndarray:
    return (0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))).astype(x.dtype, copy=False)


def leaky_relu(x: np.ndarray, slope: float = 0.1) -> np.ndarray:
    return np.where(x >= 0, x, slope * x)
