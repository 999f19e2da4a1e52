"""PNG and manifest I/O.

Frames are 8-bit RGB PNG, depth is 16-bit grayscale PNG in millimetres and
confidence is 8-bit grayscale PNG scaled to [0, 1] by 1/255.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from blurforge.errors import InputError

SCHEMA = 1
SPLITS = ("train", "val", "test")
REPORT_DIGITS = 10


def read_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode != "RGB":
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8).copy()


def write_rgb(path: str | Path, frame: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(frame, dtype=np.uint8), mode="RGB").save(path)


def read_gray16(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im).astype(np.uint16)


def write_gray16(path: str | Path, data: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(data, dtype=np.uint16)).save(path)


def read_gray8(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8).copy()


def write_gray8(path: str | Path, data: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(data, dtype=np.uint8), mode="L").save(path)


def depth_from_mm(mm: np.ndarray) -> np.ndarray:
    return mm.astype(np.float64) / 1000.0


def depth_to_mm(metres: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(metres) * 1000.0).astype(np.uint16)


@dataclass
class ClipManifest:
    clip_id: str
    fps: float
    frames: list[str]
    depth: list[str]
    confidence: list[str]
    split: str = "test"
    sharp: list[str] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.frames)
        if n < 1:
            raise InputError(f"clip {self.clip_id!r}: no frames")
        if len(self.depth) != n or len(self.confidence) != n:
            raise InputError(f"clip {self.clip_id!r}: frames, depth and confidence lengths differ")
        if self.sharp and len(self.sharp) != n:
            raise InputError(f"clip {self.clip_id!r}: sharp list length differs from frames")
        if not self.fps > 0:
            raise InputError(f"clip {self.clip_id!r}: fps must be positive")
        if self.split not in SPLITS:
            raise InputError(f"clip {self.clip_id!r}: split must be one of {SPLITS}")

    def require_source(self) -> None:
        # synthesized output manifests may hold a single frame; source clips may not
        if len(self.frames) < 2:
            raise InputError(f"clip {self.clip_id!r}: at least 2 frames required")

    @classmethod
    def from_dict(cls, d: dict) -> ClipManifest:
        known = {"clip_id", "fps", "frames", "depth", "confidence", "split", "sharp"}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown manifest fields: {sorted(unknown)}")
        missing = {"clip_id", "fps", "frames", "depth", "confidence"} - set(d)
        if missing:
            raise InputError(f"missing manifest fields: {sorted(missing)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        if not self.sharp:
            del d["sharp"]
        return d


def load_manifest(path: str | Path) -> list[ClipManifest]:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise InputError(f"{path}: manifest must be a JSON object")
    unknown = set(doc) - {"schema", "clips"}
    if unknown:
        raise InputError(f"{path}: unknown manifest fields: {sorted(unknown)}")
    if doc.get("schema") != SCHEMA:
        raise InputError(f"{path}: unsupported manifest schema {doc.get('schema')!r}")
    return [ClipManifest.from_dict(c) for c in doc.get("clips", [])]


def dump_manifest(path: str | Path, clips: list[ClipManifest]) -> None:
    doc = {"schema": SCHEMA, "clips": [c.to_dict() for c in clips]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def fixed(x):
    """Round floats to a fixed number of significant digits for stable reports."""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return float(f"{x:.{REPORT_DIGITS}g}")
    if isinstance(x, (np.floating, np.integer)):
        return fixed(x.item())
    if isinstance(x, dict):
        return {k: fixed(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [fixed(v) for v in x]
    return x


def dump_report(path: str | Path, report: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(fixed(report), indent=1, sort_keys=True) + "\n")


def write_csv(path: str | Path, columns: list[str], rows: list[dict]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: fixed(row.get(k, "")) for k in columns})
