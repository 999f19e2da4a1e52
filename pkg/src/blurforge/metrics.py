"""PSNR/SSIM and the sliced analyses built on them."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from blurforge.annotate import ENVIRONMENTS, MOTIONS, PROXIMITY, bin_edges, confidence_bin
from blurforge.errors import InputError

WINDOW = 11
SIGMA = 1.5
LUMA = np.array([0.299, 0.587, 0.114])
CATEGORIES = {"environment": ENVIRONMENTS, "motion": MOTIONS, "proximity": PROXIMITY}


@dataclass(frozen=True)
class FramePairMetrics:
    clip: str
    index: int
    psnr: float
    ssim: float

    @property
    def key(self) -> tuple[str, int]:
        return (self.clip, self.index)


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """PSNR in dB; identical inputs give ``math.inf``."""
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def to_luma(img: np.ndarray) -> np.ndarray:
    img = img.astype(np.float64)
    if img.ndim == 2:
        return img
    return img @ LUMA


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    rows = sliding_window_view(x, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def ssim_map(x: np.ndarray, y: np.ndarray, peak: float = 255.0) -> np.ndarray:
    g = gaussian_window()
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mx = _filter_valid(x, g)
    my = _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(a: np.ndarray, b: np.ndarray, mode: str = "luma", peak: float = 255.0) -> float:
    """Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), valid positions only.

    ``mode="luma"`` scores Rec.601 luma; ``mode="channels"`` averages the
    per-channel scores.
    """
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < WINDOW:
        raise InputError(f"image {a.shape[:2]} smaller than the {WINDOW}x{WINDOW} window")
    if mode == "luma":
        return float(ssim_map(to_luma(a), to_luma(b), peak).mean())
    if mode == "channels":
        if a.ndim == 2:
            return float(ssim_map(a.astype(np.float64), b.astype(np.float64), peak).mean())
        vals = [ssim_map(a[..., c].astype(np.float64), b[..., c].astype(np.float64), peak).mean()
                for c in range(a.shape[2])]
        return float(np.mean(vals))
    raise InputError(f"unknown ssim mode {mode!r}")


def score_pair(clip: str, index: int, pred: np.ndarray, gt: np.ndarray, ssim_mode: str = "luma") -> FramePairMetrics:
    return FramePairMetrics(clip=clip, index=index, psnr=psnr(pred, gt), ssim=ssim(pred, gt, ssim_mode))


@dataclass
class SliceStats:
    count: int = 0
    psnr_sum: float = 0.0
    psnr_count: int = 0
    ssim_sum: float = 0.0
    infinite: int = 0

    def add(self, m: FramePairMetrics) -> None:
        self.count += 1
        self.ssim_sum += m.ssim
        if math.isinf(m.psnr):
            self.infinite += 1
        else:
            self.psnr_sum += m.psnr
            self.psnr_count += 1

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "psnr": self.psnr_sum / self.psnr_count if self.psnr_count else None,
            "psnr_count": self.psnr_count,
            "ssim": self.ssim_sum / self.count if self.count else None,
            "psnr_infinite": self.infinite,
        }


@dataclass
class SlicedReport:
    overall: SliceStats
    slices: dict[str, dict[str, SliceStats]]
    missing: list[tuple[str, int]] = field(default_factory=list)
    gain_by_confidence: list[dict] | None = None

    def to_dict(self) -> dict:
        out = {
            "overall": self.overall.to_dict(),
            "slices": {cat: {v: s.to_dict() for v, s in vals.items()} for cat, vals in self.slices.items()},
            "missing_annotations": [list(k) for k in self.missing],
        }
        if self.gain_by_confidence is not None:
            out["gain_by_confidence"] = self.gain_by_confidence
        return out


def aggregate_by_attribute(metrics: Sequence[FramePairMetrics],
                           annotations: Mapping[tuple[str, int], Mapping[str, object]]) -> SlicedReport:
    """Mean PSNR/SSIM per attribute value; frames without annotations are listed, not sliced."""
    slices = {cat: {v: SliceStats() for v in values} for cat, values in CATEGORIES.items()}
    overall = SliceStats()
    missing = []
    for m in sorted(metrics, key=lambda m: m.key):
        ann = annotations.get(m.key)
        if ann is None:
            missing.append(m.key)
            continue
        overall.add(m)
        for cat in CATEGORIES:
            value = ann[cat]
            if value not in slices[cat]:
                raise InputError(f"{m.key}: unknown {cat} value {value!r}")
            slices[cat][value].add(m)
    return SlicedReport(overall=overall, slices=slices, missing=missing)


def gain_by_confidence(run_a: Sequence[FramePairMetrics], run_b: Sequence[FramePairMetrics],
                       confidences: Mapping[tuple[str, int], float], bin_width: float = 0.1) -> list[dict]:
    """Mean ``psnr_a - psnr_b`` per mean-confidence bin.

    Pairs where either PSNR is infinite are skipped. Bins without frames
    report ``gain=None``.
    """
    a = {m.key: m for m in run_a}
    b = {m.key: m for m in run_b}
    if a.keys() != b.keys():
        only_a = sorted(a.keys() - b.keys())
        only_b = sorted(b.keys() - a.keys())
        raise InputError(f"runs cover different frames; only in A: {only_a}, only in B: {only_b}")
    no_conf = sorted(k for k in a if k not in confidences)
    if no_conf:
        raise InputError(f"no confidence for frames: {no_conf}")
    diffs: dict[int, list[float]] = defaultdict(list)
    skipped: dict[int, int] = defaultdict(int)
    for key in sorted(a):
        k = confidence_bin(confidences[key], bin_width)
        pa, pb = a[key].psnr, b[key].psnr
        if math.isinf(pa) or math.isinf(pb):
            skipped[k] += 1
            continue
        diffs[k].append(pa - pb)
    out = []
    for k, (lo, hi) in enumerate(bin_edges(bin_width)):
        d = diffs.get(k, [])
        out.append({
            "bin": k,
            "lo": lo,
            "hi": hi,
            "count": len(d),
            "skipped_infinite": skipped.get(k, 0),
            "gain": math.fsum(d) / len(d) if d else None,
        })
    return out
