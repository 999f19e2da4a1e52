"""Blur synthesis by averaging interpolated frames in linear colour space.

A clip of ``K`` original frames interpolated by factor ``f`` becomes a
sequence of ``(K - 1) * f + 1`` samples; sample ``j`` sits at original time
``j / f``. Output frame ``m`` averages samples ``[mN, mN + N)`` and is paired
with the original frame closest to sample ``mN + N // 2``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from blurforge import io
from blurforge.annotate import DepthFrame
from blurforge.crf import InverseCrf, encode, linearize
from blurforge.errors import ConfigurationError, InputError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    crf: InverseCrf
    interp_factor: int = 8
    window: int = 32

    def __post_init__(self):
        if self.interp_factor < 1:
            raise ConfigurationError("interp_factor must be >= 1")
        if self.window < 1:
            raise ConfigurationError("window must be >= 1")


@dataclass
class BlurSharpDepthSample:
    blur: np.ndarray
    sharp: np.ndarray
    depth: DepthFrame
    source_index: int
    output_index: int
    interp_index: int = 0
    depth_mm: np.ndarray | None = field(default=None, repr=False)
    confidence_u8: np.ndarray | None = field(default=None, repr=False)


def interpolate_crossfade(a: np.ndarray, b: np.ndarray, k: int) -> list[np.ndarray]:
    if a.shape != b.shape:
        raise InputError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if k < 1:
        raise InputError("k must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return [(1.0 - i / (k + 1)) * a + (i / (k + 1)) * b for i in range(1, k + 1)]


def average_linear(window: Sequence[np.ndarray]) -> np.ndarray:
    if len(window) == 0:
        raise InputError("cannot average an empty window")
    shape = window[0].shape
    acc = np.zeros(shape, dtype=np.float64)
    for f in window:
        if f.shape != shape:
            raise InputError(f"window frame shapes differ: {f.shape} vs {shape}")
        acc += f
    return acc / len(window)


def synthesize_blur(window: Sequence[np.ndarray], crf: InverseCrf) -> np.ndarray:
    codes, _ = encode(average_linear(window), crf)
    return codes


def groundtruth_index(m: int, n: int) -> int:
    if m < 0 or n < 1:
        raise InputError("need m >= 0 and N >= 1")
    return m * n + n // 2


def interpolated_length(n_original: int, interp_factor: int) -> int:
    return (n_original - 1) * interp_factor + 1


def n_windows(n_original: int, interp_factor: int, window: int) -> int:
    return interpolated_length(n_original, interp_factor) // window


def output_fps(fps: float, interp_factor: int, window: int) -> float:
    return fps * interp_factor / window


def original_index(sample: int, interp_factor: int) -> int:
    """Original frame nearest to interpolated ``sample``; halfway ties go to the earlier frame."""
    t = Fraction(sample, interp_factor)
    lo = t.numerator // t.denominator
    return lo if t - lo <= Fraction(1, 2) else lo + 1


def sharp_index(m: int, interp_factor: int, window: int) -> int:
    return original_index(groundtruth_index(m, window), interp_factor)


class CrossfadeSource:
    """Interpolated linear samples built on demand from linearized originals."""

    def __init__(self, originals: Sequence[np.ndarray], interp_factor: int):
        self.originals = originals
        self.f = interp_factor

    def __len__(self) -> int:
        return interpolated_length(len(self.originals), self.f)

    def __getitem__(self, j: int) -> np.ndarray:
        k, r = divmod(j, self.f)
        if r == 0:
            return self.originals[k]
        w = r / self.f
        return (1.0 - w) * self.originals[k] + w * self.originals[k + 1]


@dataclass
class PipelineResult:
    samples: list[BlurSharpDepthSample]
    manifest: io.ClipManifest | None
    skipped: bool = False


def _window_samples(source, m: int, n: int) -> np.ndarray:
    acc = None
    for j in range(m * n, (m + 1) * n):
        f = source[j]
        acc = f.astype(np.float64, copy=True) if acc is None else acc + f
    return acc / n


def run_pipeline(manifest: io.ClipManifest, cfg: SynthConfig, base_dir: str | Path = ".",
                 interpolated: Sequence[Path] | None = None, threads: int = 1,
                 reader: Callable[[Path], np.ndarray] = io.read_rgb) -> PipelineResult:
    """Synthesize all complete windows of one clip.

    ``interpolated`` optionally lists externally produced encoded frames for
    the whole interpolated timeline; they are linearized and averaged instead
    of cross-fading the originals.
    """
    base = Path(base_dir)
    manifest.require_source()
    for rel in manifest.depth + manifest.confidence:
        if not (base / rel).is_file():
            raise FileNotFoundError(f"clip {manifest.clip_id!r}: missing depth/confidence file {base / rel}")

    n_orig = len(manifest.frames)
    if interpolated is not None:
        expected = interpolated_length(n_orig, cfg.interp_factor)
        if len(interpolated) != expected:
            raise InputError(
                f"clip {manifest.clip_id!r}: expected {expected} interpolated frames, found {len(interpolated)}")
        n_samples_total = len(interpolated)
    else:
        n_samples_total = interpolated_length(n_orig, cfg.interp_factor)
    count = n_samples_total // cfg.window
    if count == 0:
        log.warning("clip %s: %d interpolated frames do not fill one window of %d; skipped",
                    manifest.clip_id, n_samples_total, cfg.window)
        return PipelineResult(samples=[], manifest=None, skipped=True)

    originals_encoded = [reader(base / p) for p in manifest.frames]
    if interpolated is not None:
        source = _LinearizedFiles(interpolated, cfg.crf, reader)
    else:
        source = CrossfadeSource([linearize(f, cfg.crf) for f in originals_encoded], cfg.interp_factor)

    def make(m: int) -> BlurSharpDepthSample:
        blur, _ = encode(_window_samples(source, m, cfg.window), cfg.crf)
        k = sharp_index(m, cfg.interp_factor, cfg.window)
        mm = io.read_gray16(base / manifest.depth[k])
        c8 = io.read_gray8(base / manifest.confidence[k])
        depth = DepthFrame(depth=io.depth_from_mm(mm), confidence=c8.astype(np.float64) / 255.0)
        return BlurSharpDepthSample(blur=blur, sharp=originals_encoded[k], depth=depth, source_index=k,
                                    output_index=m, interp_index=groundtruth_index(m, cfg.window), depth_mm=mm, confidence_u8=c8)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(make, range(count)))
    else:
        samples = [make(m) for m in range(count)]

    names = [f"{m:08d}.png" for m in range(count)]
    out = io.ClipManifest(
        clip_id=manifest.clip_id,
        fps=output_fps(manifest.fps, cfg.interp_factor, cfg.window),
        frames=[f"{manifest.clip_id}/blur/{n}" for n in names],
        depth=[f"{manifest.clip_id}/depth/{n}" for n in names],
        confidence=[f"{manifest.clip_id}/conf/{n}" for n in names],
        split=manifest.split,
        sharp=[f"{manifest.clip_id}/gt/{n}" for n in names],
    )
    return PipelineResult(samples=samples, manifest=out)


class _LinearizedFiles:
    def __init__(self, paths: Sequence[Path], crf: InverseCrf, reader):
        self.paths = list(paths)
        self.crf = crf
        self.reader = reader

    def __len__(self) -> int:
        return len(self.paths)

    def __getitem__(self, j: int) -> np.ndarray:
        return linearize(self.reader(self.paths[j]), self.crf)


def write_samples(out_dir: str | Path, clip_id: str, samples: Sequence[BlurSharpDepthSample]) -> None:
    clip = Path(out_dir) / clip_id
    for s in samples:
        name = f"{s.output_index:08d}.png"
        io.write_rgb(clip / "blur" / name, s.blur)
        io.write_rgb(clip / "gt" / name, s.sharp)
        mm = s.depth_mm if s.depth_mm is not None else io.depth_to_mm(s.depth.depth)
        c8 = s.confidence_u8 if s.confidence_u8 is not None else np.round(s.depth.confidence * 255).astype(np.uint8)
        io.write_gray16(clip / "depth" / name, mm)
        io.write_gray8(clip / "conf" / name, c8)
