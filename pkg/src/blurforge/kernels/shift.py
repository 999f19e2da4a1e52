"""Temporal and grouped spatial shifts on ``(T, C, H, W)`` feature tensors."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from blurforge.errors import ConfigurationError, InputError


class ShiftDirection(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def sign(self) -> int:
        return 1 if self is ShiftDirection.FORWARD else -1


def _check_tensor(f: np.ndarray) -> None:
    if f.ndim != 4 or min(f.shape) < 1:
        raise InputError(f"expected a non-empty (T, C, H, W) tensor, got shape {f.shape}")


def temporal_shift(f: np.ndarray, direction: ShiftDirection) -> np.ndarray:
    """Roll the flattened (T*C) axis by +-C/2; a single frame is returned unchanged."""
    _check_tensor(f)
    t, c, h, w = f.shape
    if t == 1:
        return f.copy()
    if c % 2:
        raise ConfigurationError(f"temporal shift needs an even channel count, got {c}")
    flat = f.reshape(t * c, h, w)
    return np.roll(flat, direction.sign * (c // 2), axis=0).reshape(t, c, h, w)


@dataclass(frozen=True)
class GssConfig:
    """Channel groups as ``(channel_count, dx, dy)``; positive dx moves content right, dy down."""

    groups: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))
        for n, dx, dy in self.groups:
            if n < 0 or int(n) != n or int(dx) != dx or int(dy) != dy:
                raise ConfigurationError(f"invalid group {(n, dx, dy)}")

    @property
    def channels(self) -> int:
        return sum(n for n, _, _ in self.groups)


def default_gss_config(channels: int, stride: int = 1) -> GssConfig:
    """Nine near-equal groups with offsets in {-d, 0, d} x {-d, 0, d}."""
    sizes = [len(a) for a in np.array_split(np.arange(channels), 9)]
    offsets = [(dx, dy) for dy, dx in itertools.product((-stride, 0, stride), repeat=2)]
    return GssConfig(tuple((n, dx, dy) for n, (dx, dy) in zip(sizes, offsets) if n > 0))


def _translate(x: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate ``(..., H, W)`` with zero fill."""
    h, w = x.shape[-2:]
    out = np.zeros_like(x)
    if abs(dx) >= w or abs(dy) >= h:
        return out
    ys, yd = (slice(0, h - dy), slice(dy, h)) if dy >= 0 else (slice(-dy, h), slice(0, h + dy))
    xs, xd = (slice(0, w - dx), slice(dx, w)) if dx >= 0 else (slice(-dx, w), slice(0, w + dx))
    out[..., yd, xd] = x[..., ys, xs]
    return out


def grouped_spatial_shift(f: np.ndarray, cfg: GssConfig) -> np.ndarray:
    _check_tensor(f)
    c = f.shape[1]
    if cfg.channels != c:
        raise ConfigurationError(f"groups cover {cfg.channels} channels, tensor has {c}")
    out = np.empty_like(f)
    start = 0
    for n, dx, dy in cfg.groups:
        out[:, start:start + n] = _translate(f[:, start:start + n], int(dx), int(dy))
        start += n
    return out


def select_shift_half(f: np.ndarray, direction: ShiftDirection) -> tuple[np.ndarray, np.ndarray]:
    """Split channels into (selected, rest): first half for forward, last half for backward."""
    _check_tensor(f)
    c = f.shape[1]
    if c % 2:
        raise ConfigurationError(f"channel split needs an even channel count, got {c}")
    first, last = f[:, : c // 2], f[:, c // 2:]
    if direction is ShiftDirection.FORWARD:
        return first.copy(), last.copy()
    return last.copy(), first.copy()


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_tensor(a)
    _check_tensor(b)
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise InputError(f"cannot concatenate {a.shape} and {b.shape} along channels")
    return np.concatenate([a, b], axis=1)
