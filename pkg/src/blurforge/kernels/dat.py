"""Depth-aware transformer fusion: cross-attention, SFT modulation and gated feed-forward.

All functions take single frames shaped ``(C, H, W)``. Image features have
``C_I`` channels, depth features ``C_D``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from blurforge.errors import ConfigurationError, InputError
from blurforge.kernels.ops import conv1x1, dwconv3x3, gelu, layer_norm, leaky_relu, softmax
from blurforge.kernels.shift import GssConfig, concat_channels, default_gss_config, grouped_spatial_shift

SFT_SLOPE = 0.1


@dataclass
class DatWeights:
    heads: int
    # cross-attention projections: 1x1 (C_out, C_in) followed by depth-wise 3x3 (C, 3, 3), bias-free
    q_pw: np.ndarray
    q_dw: np.ndarray
    k_pw: np.ndarray
    k_dw: np.ndarray
    v_pw: np.ndarray
    v_dw: np.ndarray
    log_alpha: np.ndarray  # (heads,)
    proj: np.ndarray  # (C_I, C_I)
    # SFT mapping blocks: 1x1 -> leaky ReLU -> 1x1, with biases
    gamma_w1: np.ndarray
    gamma_b1: np.ndarray
    gamma_w2: np.ndarray
    gamma_b2: np.ndarray
    beta_w1: np.ndarray
    beta_b1: np.ndarray
    beta_w2: np.ndarray
    beta_b2: np.ndarray
    # gated feed-forward
    ln_weight: np.ndarray
    ln_bias: np.ndarray
    w1_pw: np.ndarray  # (hidden, C_I)
    w1_dw: np.ndarray  # (hidden, 3, 3)
    w2_pw: np.ndarray
    w2_dw: np.ndarray
    w0: np.ndarray  # (C_I, hidden)

    def __post_init__(self):
        ci, cd = self.c_image, self.c_depth
        if self.heads < 1 or ci % self.heads or cd % self.heads:
            raise ConfigurationError(f"{self.heads} heads must divide C_I={ci} and C_D={cd}")
        if self.log_alpha.shape != (self.heads,):
            raise ConfigurationError(f"log_alpha must have shape ({self.heads},)")
        expected = {
            "q_pw": (ci, ci), "q_dw": (ci, 3, 3), "k_pw": (cd, cd), "k_dw": (cd, 3, 3),
            "v_pw": (cd, cd), "v_dw": (cd, 3, 3), "proj": (ci, ci),
            "gamma_w1": (ci, ci), "gamma_b1": (ci,), "gamma_w2": (ci, ci), "gamma_b2": (ci,),
            "beta_w1": (ci, ci), "beta_b1": (ci,), "beta_w2": (ci, ci), "beta_b2": (ci,),
            "ln_weight": (ci,), "ln_bias": (ci,),
            "w1_pw": (self.hidden, ci), "w1_dw": (self.hidden, 3, 3),
            "w2_pw": (self.hidden, ci), "w2_dw": (self.hidden, 3, 3), "w0": (ci, self.hidden),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ConfigurationError(f"{name} has shape {got}, expected {shape}")

    @property
    def c_image(self) -> int:
        return self.q_pw.shape[0]

    @property
    def c_depth(self) -> int:
        return self.k_pw.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1_pw.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        return np.exp(self.log_alpha)

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "heads"}

    def astype(self, dtype) -> DatWeights:
        return DatWeights(heads=self.heads, **{k: v.astype(dtype) for k, v in self.arrays().items()})

    def replace(self, **changes) -> DatWeights:
        arrays = self.arrays()
        arrays.update(changes)
        return DatWeights(heads=self.heads, **arrays)

    @classmethod
    def random(cls, c_image: int, c_depth: int, heads: int = 1, expansion: int = 2,
               rng: np.random.Generator | None = None, scale: float = 0.5) -> DatWeights:
        rng = rng if rng is not None else np.random.default_rng(0)
        ci, cd, hid = c_image, c_depth, expansion * c_image

        def r(*shape):
            return scale * rng.standard_normal(shape)

        return cls(
            heads=heads,
            q_pw=r(ci, ci), q_dw=r(ci, 3, 3), k_pw=r(cd, cd), k_dw=r(cd, 3, 3),
            v_pw=r(cd, cd), v_dw=r(cd, 3, 3),
            log_alpha=rng.uniform(-0.5, 1.0, heads), proj=r(ci, ci),
            gamma_w1=r(ci, ci), gamma_b1=r(ci), gamma_w2=r(ci, ci), gamma_b2=1.0 + r(ci),
            beta_w1=r(ci, ci), beta_b1=r(ci), beta_w2=r(ci, ci), beta_b2=r(ci),
            ln_weight=1.0 + r(ci), ln_bias=r(ci),
            w1_pw=r(hid, ci), w1_dw=r(hid, 3, 3), w2_pw=r(hid, ci), w2_dw=r(hid, 3, 3), w0=r(ci, hid),
        )

    def to_json(self) -> dict:
        return {
            "heads": self.heads,
            "tensors": {k: {"shape": list(v.shape), "data": [float(x) for x in v.ravel()]}
                        for k, v in self.arrays().items()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> DatWeights:
        tensors = {k: np.asarray(t["data"], dtype=np.float64).reshape(t["shape"])
                   for k, t in doc["tensors"].items()}
        return cls(heads=int(doc["heads"]), **tensors)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> DatWeights:
        return cls.from_json(json.loads(Path(path).read_text()))


def _check_frame(x: np.ndarray, channels: int, name: str) -> None:
    if x.ndim != 3 or x.shape[0] != channels:
        raise InputError(f"{name} must be ({channels}, H, W), got {x.shape}")


def attention_maps(f_img: np.ndarray, f_depth: np.ndarray, w: DatWeights) -> tuple[list[np.ndarray], np.ndarray]:
    """Per-head attention maps ``(C_I/h, C_D/h)`` and the value tensor ``(C_D, H*W)``."""
    _check_frame(f_img, w.c_image, "image features")
    _check_frame(f_depth, w.c_depth, "depth features")
    if f_img.shape[1:] != f_depth.shape[1:]:
        raise InputError(f"spatial sizes differ: {f_img.shape[1:]} vs {f_depth.shape[1:]}")
    hw = f_img.shape[1] * f_img.shape[2]
    q = dwconv3x3(conv1x1(f_img, w.q_pw), w.q_dw).reshape(w.c_image, hw)
    k = dwconv3x3(conv1x1(f_depth, w.k_pw), w.k_dw).reshape(w.c_depth, hw)
    v = dwconv3x3(conv1x1(f_depth, w.v_pw), w.v_dw).reshape(w.c_depth, hw)
    ci, cd = w.c_image // w.heads, w.c_depth // w.heads
    alpha = w.alpha.astype(f_img.dtype)
    maps = []
    for h in range(w.heads):
        qh = q[h * ci:(h + 1) * ci]
        kh = k[h * cd:(h + 1) * cd]
        # rows index image channels, columns depth channels; normalize over depth channels
        maps.append(softmax(qh @ kh.T / alpha[h], axis=1))
    return maps, v


def cross_attention(f_img: np.ndarray, f_depth: np.ndarray, w: DatWeights,
                    return_attention: bool = False):
    maps, v = attention_maps(f_img, f_depth, w)
    cd = w.c_depth // w.heads
    # Y^T per head: (C_I/h, C_D/h) @ (C_D/h, HW)
    y = np.concatenate([a @ v[h * cd:(h + 1) * cd] for h, a in enumerate(maps)], axis=0)
    out = conv1x1(y.reshape(w.c_image, *f_img.shape[1:]), w.proj)
    return (out, maps) if return_attention else out


def _mapping(z: np.ndarray, w1, b1, w2, b2) -> np.ndarray:
    return conv1x1(leaky_relu(conv1x1(z, w1, b1), SFT_SLOPE), w2, b2)


def sft_modulate(f_img: np.ndarray, z: np.ndarray, w: DatWeights) -> np.ndarray:
    _check_frame(f_img, w.c_image, "image features")
    if z.shape != f_img.shape:
        raise InputError(f"condition {z.shape} does not match features {f_img.shape}")
    gamma = _mapping(z, w.gamma_w1, w.gamma_b1, w.gamma_w2, w.gamma_b2)
    beta = _mapping(z, w.beta_w1, w.beta_b1, w.beta_w2, w.beta_b2)
    return gamma * f_img + beta


def gdfn(f: np.ndarray, w: DatWeights) -> np.ndarray:
    _check_frame(f, w.c_image, "features")
    n = layer_norm(f, w.ln_weight, w.ln_bias)
    gate = gelu(dwconv3x3(conv1x1(n, w.w1_pw), w.w1_dw))
    value = dwconv3x3(conv1x1(n, w.w2_pw), w.w2_dw)
    return conv1x1(gate * value, w.w0) + f


def dat_block(f_img: np.ndarray, f_depth: np.ndarray, w: DatWeights) -> np.ndarray:
    aligned = cross_attention(f_img, f_depth, w)
    return gdfn(sft_modulate(f_img, aligned, w), w)


def shifted_depth(f_depth: np.ndarray, gss: GssConfig | None = None) -> np.ndarray:
    """Depth features concatenated with their grouped spatial shift (unshifted first)."""
    gss = gss if gss is not None else default_gss_config(f_depth.shape[0])
    t = f_depth[None]
    return concat_channels(t, grouped_spatial_shift(t, gss))[0]


def fuse_depth(f_img: np.ndarray, f_depth: np.ndarray, w: DatWeights, use_gss: bool = True,
               gss: GssConfig | None = None) -> np.ndarray:
    """Fuse depth into image features; with ``use_gss`` the weights must expect ``2 * C_D`` depth channels."""
    if use_gss:
        f_depth = shifted_depth(f_depth, gss)
    return dat_block(f_img, f_depth, w)
