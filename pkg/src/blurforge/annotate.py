"""Per-frame attributes from depth: proximity labels, confidence statistics, normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from blurforge.errors import DegenerateDepthError, InputError, UnlabeledError

PROXIMITY = ("Close", "Mid", "Far")
ENVIRONMENTS = ("Indoors", "Outdoors")
MOTIONS = ("CM", "CM+MO")
# upper edges (inclusive) of Close and Mid, metres
BIN_EDGES = (1.5, 4.5)


@dataclass(frozen=True)
class DepthFrame:
    depth: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        if self.depth.shape != self.confidence.shape:
            raise InputError(f"depth {self.depth.shape} and confidence {self.confidence.shape} differ in shape")
        if np.any(self.depth < 0):
            raise InputError("negative depth values")
        if np.any(self.confidence < 0) or np.any(self.confidence > 1):
            raise InputError("confidence values outside [0, 1]")


@dataclass(frozen=True)
class FrameAttributes:
    environment: str
    motion: str
    proximity: str

    def __post_init__(self):
        if self.environment not in ENVIRONMENTS:
            raise InputError(f"unknown environment {self.environment!r}")
        if self.motion not in MOTIONS:
            raise InputError(f"unknown motion {self.motion!r}")
        if self.proximity not in PROXIMITY:
            raise InputError(f"unknown proximity {self.proximity!r}")


def proximity_counts(d: DepthFrame) -> np.ndarray:
    z = d.depth[d.depth > 0]
    close = np.count_nonzero(z <= BIN_EDGES[0])
    mid = np.count_nonzero((z > BIN_EDGES[0]) & (z <= BIN_EDGES[1]))
    far = np.count_nonzero(z > BIN_EDGES[1])
    return np.array([close, mid, far])


def proximity_label(d: DepthFrame, prefer: str = "near") -> str:
    """Majority distance bin over valid (non-zero) depth pixels.

    Ties go to the nearer bin unless ``prefer="far"``.
    """
    counts = proximity_counts(d)
    if counts.sum() == 0:
        raise UnlabeledError("no valid depth pixels")
    if prefer == "near":
        return PROXIMITY[int(np.argmax(counts))]
    if prefer == "far":
        return PROXIMITY[2 - int(np.argmax(counts[::-1]))]
    raise InputError(f"prefer must be 'near' or 'far', got {prefer!r}")


def mean_confidence(d: DepthFrame) -> float:
    return float(np.mean(d.confidence, dtype=np.float64))


def n_bins(bin_width: float) -> int:
    n = round(1.0 / bin_width)
    if n < 1 or not math.isclose(n * bin_width, 1.0, rel_tol=1e-9):
        raise InputError(f"bin width {bin_width} does not divide [0, 1] evenly")
    return n


def confidence_bin(value: float, bin_width: float = 0.1) -> int:
    """Index of the right-open bin ``[k w, (k+1) w)``; 1.0 falls in the last bin."""
    n = n_bins(bin_width)
    # rounding guards against 0.3 / 0.1 == 2.9999999999999996
    k = math.floor(round(value / bin_width, 9))
    return min(max(k, 0), n - 1)


def confidence_histogram(frames: Iterable[DepthFrame | float], bin_width: float = 0.1) -> list[int]:
    """Frame counts per mean-confidence bin; accepts frames or precomputed means."""
    means = [f if isinstance(f, (int, float)) else mean_confidence(f) for f in frames]
    if not means:
        return []
    counts = [0] * n_bins(bin_width)
    for m in means:
        counts[confidence_bin(m, bin_width)] += 1
    return counts


def bin_edges(bin_width: float = 0.1) -> list[tuple[float, float]]:
    n = n_bins(bin_width)
    return [(round(k * bin_width, 9), round((k + 1) * bin_width, 9)) for k in range(n)]


def normalize_depth(sequence: Sequence[DepthFrame | np.ndarray]) -> list[np.ndarray]:
    """Divide every depth map by the maximum over the whole sequence."""
    maps = [f.depth if isinstance(f, DepthFrame) else np.asarray(f, dtype=np.float64) for f in sequence]
    if not maps:
        raise DegenerateDepthError("empty depth sequence")
    top = max(float(m.max()) for m in maps)
    if not top > 0:
        raise DegenerateDepthError("depth sequence has no positive value")
    return [m / top for m in maps]


def annotate_frames(clip_id: str, frames: Sequence[DepthFrame], environment: str, motion: str,
                    prefer: str = "near") -> list[dict]:
    rows = []
    for i, d in enumerate(frames):
        attrs = FrameAttributes(environment=environment, motion=motion, proximity=proximity_label(d, prefer))
        rows.append({
            "clip": clip_id,
            "index": i,
            "proximity": attrs.proximity,
            "environment": attrs.environment,
            "motion": attrs.motion,
            "mean_confidence": mean_confidence(d),
        })
    return rows
