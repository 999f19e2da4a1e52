"""Scalar-loop float64 references for the kernels.

Deliberately naive: explicit index arithmetic, no numpy vector ops beyond
allocation, so they share no code path with the implementations they check.
"""

from __future__ import annotations

import math

import numpy as np

from blurforge.kernels.ops import LN_EPS
from blurforge.kernels.dat import SFT_SLOPE, DatWeights


def temporal_shift(f, sign: int) -> np.ndarray:
    t, c, h, w = f.shape
    out = np.zeros(f.shape, dtype=np.float64)
    if t == 1:
        out[...] = f
        return out
    n = t * c
    s = sign * (c // 2)
    for ti in range(t):
        for ci in range(c):
            dst = (ti * c + ci + s) % n
            for y in range(h):
                for x in range(w):
                    out[dst // c, dst % c, y, x] = f[ti, ci, y, x]
    return out


def grouped_spatial_shift(f, groups) -> np.ndarray:
    t, c, h, w = f.shape
    out = np.zeros(f.shape, dtype=np.float64)
    ch = 0
    for n, dx, dy in groups:
        for ci in range(ch, ch + n):
            for ti in range(t):
                for y in range(h):
                    for x in range(w):
                        sy, sx = y - dy, x - dx
                        if 0 <= sy < h and 0 <= sx < w:
                            out[ti, ci, y, x] = f[ti, ci, sy, sx]
        ch += n
    return out


def concat_channels(a, b) -> np.ndarray:
    t, ca, h, w = a.shape
    cb = b.shape[1]
    out = np.zeros((t, ca + cb, h, w))
    for ti in range(t):
        for ci in range(ca + cb):
            for y in range(h):
                for x in range(w):
                    out[ti, ci, y, x] = a[ti, ci, y, x] if ci < ca else b[ti, ci - ca, y, x]
    return out


def conv1x1(x, w, b=None) -> np.ndarray:
    cin, h, wd = x.shape
    cout = len(w)
    out = np.zeros((cout, h, wd))
    for o in range(cout):
        for y in range(h):
            for xx in range(wd):
                s = 0.0 if b is None else float(b[o])
                for i in range(cin):
                    s += float(w[o][i]) * float(x[i, y, xx])
                out[o, y, xx] = s
    return out


def dwconv3x3(x, w) -> np.ndarray:
    c, h, wd = x.shape
    out = np.zeros((c, h, wd))
    for ci in range(c):
        for y in range(h):
            for xx in range(wd):
                s = 0.0
                for ky in range(3):
                    for kx in range(3):
                        sy, sx = y + ky - 1, xx + kx - 1
                        if 0 <= sy < h and 0 <= sx < wd:
                            s += float(w[ci][ky][kx]) * float(x[ci, sy, sx])
                out[ci, y, xx] = s
    return out


def layer_norm(x, weight, bias, eps: float = LN_EPS) -> np.ndarray:
    c, h, wd = x.shape
    out = np.zeros((c, h, wd))
    for y in range(h):
        for xx in range(wd):
            vals = [float(x[i, y, xx]) for i in range(c)]
            mu = sum(vals) / c
            var = sum((v - mu) ** 2 for v in vals) / c
            for i in range(c):
                out[i, y, xx] = (vals[i] - mu) / math.sqrt(var + eps) * float(weight[i]) + float(bias[i])
    return out


def softmax_rows(m) -> np.ndarray:
    rows, cols = len(m), len(m[0])
    out = np.zeros((rows, cols))
    for i in range(rows):
        top = max(float(v) for v in m[i])
        e = [math.exp(float(m[i][j]) - top) for j in range(cols)]
        s = sum(e)
        for j in range(cols):
            out[i, j] = e[j] / s
    return out


def gelu(x) -> np.ndarray:
    out = np.zeros(np.shape(x))
    for idx in np.ndindex(out.shape):
        v = float(x[idx])
        out[idx] = 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0)))
    return out


def leaky_relu(x, slope: float = SFT_SLOPE) -> np.ndarray:
    out = np.zeros(np.shape(x))
    for idx in np.ndindex(out.shape):
        v = float(x[idx])
        out[idx] = v if v >= 0 else slope * v
    return out


def cross_attention(f_img, f_depth, w: DatWeights, return_attention: bool = False):
    _, h, wd = f_img.shape
    hw = h * wd
    q = dwconv3x3(conv1x1(f_img, w.q_pw), w.q_dw)
    k = dwconv3x3(conv1x1(f_depth, w.k_pw), w.k_dw)
    v = dwconv3x3(conv1x1(f_depth, w.v_pw), w.v_dw)
    ci, cd = w.c_image // w.heads, w.c_depth // w.heads
    y = np.zeros((w.c_image, h, wd))
    maps = []
    for head in range(w.heads):
        alpha = math.exp(float(w.log_alpha[head]))
        logits = np.zeros((ci, cd))
        for i in range(ci):
            for j in range(cd):
                s = 0.0
                for p in range(hw):
                    py, px = divmod(p, wd)
                    s += q[head * ci + i, py, px] * k[head * cd + j, py, px]
                logits[i, j] = s / alpha
        a = softmax_rows(logits)
        maps.append(a)
        for p in range(hw):
            py, px = divmod(p, wd)
            for i in range(ci):
                s = 0.0
                for j in range(cd):
                    s += v[head * cd + j, py, px] * a[i, j]
                y[head * ci + i, py, px] = s
    out = conv1x1(y, w.proj)
    return (out, maps) if return_attention else out


def sft_modulate(f_img, z, w: DatWeights) -> np.ndarray:
    gamma = conv1x1(leaky_relu(conv1x1(z, w.gamma_w1, w.gamma_b1)), w.gamma_w2, w.gamma_b2)
    beta = conv1x1(leaky_relu(conv1x1(z, w.beta_w1, w.beta_b1)), w.beta_w2, w.beta_b2)
    out = np.zeros(f_img.shape)
    for idx in np.ndindex(out.shape):
        out[idx] = gamma[idx] * float(f_img[idx]) + beta[idx]
    return out


def gdfn(f, w: DatWeights) -> np.ndarray:
    n = layer_norm(f, w.ln_weight, w.ln_bias)
    gate = gelu(dwconv3x3(conv1x1(n, w.w1_pw), w.w1_dw))
    value = dwconv3x3(conv1x1(n, w.w2_pw), w.w2_dw)
    prod = np.zeros(gate.shape)
    for idx in np.ndindex(gate.shape):
        prod[idx] = gate[idx] * value[idx]
    out = conv1x1(prod, w.w0)
    for idx in np.ndindex(out.shape):
        out[idx] += float(f[idx])
    return out


def dat_block(f_img, f_depth, w: DatWeights) -> np.ndarray:
    return gdfn(sft_modulate(f_img, cross_attention(f_img, f_depth, w), w), w)


def fuse_depth(f_img, f_depth, w: DatWeights, use_gss: bool, groups) -> np.ndarray:
    if use_gss:
        t = np.asarray(f_depth, dtype=np.float64)[None]
        f_depth = concat_channels(t, grouped_spatial_shift(t, groups))[0]
    return dat_block(f_img, f_depth, w)
