"""Deterministic synthetic data: exposure stacks and a small RGB-D clip."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from blurforge import io

DEFAULT_TIMES = (1 / 60, 1 / 30, 1 / 15, 1 / 8, 1 / 4)


def gamma_response(gamma: float):
    def respond(x: np.ndarray) -> np.ndarray:
        return np.clip(x, 0.0, 1.0) ** (1.0 / gamma)
    return respond


def exposure_stack_images(respond, times=DEFAULT_TIMES, height: int = 120, width: int = 160,
                          seed: int = 0) -> list[np.ndarray]:
    """Pre-aligned 8-bit captures of a static scene at each exposure time.

    ``respond`` maps relative exposure in [0, 1] to [0, 1] before 8-bit
    quantization. The scene is a log-spaced irradiance ramp (horizontal) with
    a per-channel tint and mild vertical variation so every code range is hit.
    """
    rng = np.random.default_rng(seed)
    u = np.linspace(0.0, 1.0, width)
    v = np.linspace(0.0, 1.0, height)[:, None]
    base = np.exp(np.log(0.02) + u * (np.log(60.0) - np.log(0.02)))[None, :]
    tint = np.array([1.0, 0.8, 0.6]) * (1.0 + 0.05 * rng.standard_normal(3))
    radiance = base[..., None] * (0.7 + 0.6 * v)[..., None] * tint
    images = []
    for t in times:
        x = radiance * t
        images.append(np.round(255.0 * respond(x)).astype(np.uint8))
    return images


def moving_square_frames(n_frames: int = 9, height: int = 32, width: int = 48, step: int = 2,
                         seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    background = (rng.uniform(40, 200, size=(height, width, 3))).astype(np.uint8)
    colour = np.array([230, 60, 30], dtype=np.uint8)
    frames = []
    for k in range(n_frames):
        f = background.copy()
        x0 = 4 + k * step
        f[10:22, x0:x0 + 10] = colour
        frames.append(f)
    return frames


def fixture_depth(n_frames: int = 9, height: int = 24, width: int = 32, seed: int = 0):
    """Depth (millimetres, uint16) and confidence (uint8) maps per frame."""
    rng = np.random.default_rng(seed + 1)
    depth, conf = [], []
    yy, xx = np.mgrid[0:height, 0:width]
    for k in range(n_frames):
        d = 800 + 60 * xx + 10 * k + rng.integers(0, 20, size=(height, width))
        d = d.astype(np.uint16)
        d[0, 0] = 0  # a dropout pixel
        c = np.clip(80 + 5 * k + 4 * yy, 0, 255).astype(np.uint8)
        depth.append(d)
        conf.append(c)
    return depth, conf


def write_fixture_clip(root: str | Path, clip_id: str = "fixture", n_frames: int = 9,
                       fps: float = 60.0, split: str = "test") -> Path:
    """Write a synthetic clip plus ``clips.json`` and ``clip_attrs.json`` under ``root``."""
    root = Path(root)
    clip_dir = root / clip_id
    for sub in ("frames", "depth", "conf"):
        (clip_dir / sub).mkdir(parents=True, exist_ok=True)
    frames = moving_square_frames(n_frames)
    depth, conf = fixture_depth(n_frames)
    entry = {"clip_id": clip_id, "fps": fps, "split": split, "frames": [], "depth": [], "confidence": []}
    for k in range(n_frames):
        name = f"{k:08d}.png"
        io.write_rgb(clip_dir / "frames" / name, frames[k])
        io.write_gray16(clip_dir / "depth" / name, depth[k])
        io.write_gray8(clip_dir / "conf" / name, conf[k])
        entry["frames"].append(f"{clip_id}/frames/{name}")
        entry["depth"].append(f"{clip_id}/depth/{name}")
        entry["confidence"].append(f"{clip_id}/conf/{name}")
    manifest = root / "clips.json"
    manifest.write_text(json.dumps({"schema": 1, "clips": [entry]}, indent=1) + "\n")
    attrs = {"schema": 1, "clips": {clip_id: {"environment": "Indoors", "motion": "CM"}}}
    (root / "clip_attrs.json").write_text(json.dumps(attrs, indent=1) + "\n")
    return manifest


def write_exposure_stack(root: str | Path, gamma: float = 2.2, times=DEFAULT_TIMES) -> Path:
    """Write a gamma-encoded exposure stack and its ``times.json``; returns the directory."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for j, im in enumerate(exposure_stack_images(gamma_response(gamma), times)):
        io.write_rgb(root / f"{j:03d}.png", im)
    (root / "times.json").write_text(json.dumps([float(t) for t in times]) + "\n")
    return root
