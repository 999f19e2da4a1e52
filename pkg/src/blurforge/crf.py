"""Camera response calibration and colour linearization.

The response is recovered with Debevec's least-squares formulation on a
pre-aligned exposure stack. The resulting inverse response is extended
linearly above code 250 (the saturated region is unreliable) and normalized
so that code 255 maps to 1.0.

Frames are plain numpy arrays: encoded frames are ``uint8`` of shape
``(H, W, 3)``, linear frames are ``float64`` in ``[0, 1]`` of the same shape.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from blurforge.errors import CalibrationDegenerateError, InputError, InvalidCurveError

N_CODES = 256
Z_MIN = 0
Z_MAX = 255
ANCHOR_CODE = 128
KNEE = 250
FLAT_EPS = 1e-7


@dataclass(frozen=True)
class ExposureStack:
    images: list[np.ndarray]
    exposure_times: list[float]

    def __post_init__(self):
        if len(self.images) < 2:
            raise InputError("an exposure stack needs at least 2 images")
        if len(self.images) != len(self.exposure_times):
            raise InputError("one exposure time per image is required")
        shape = self.images[0].shape
        for im in self.images:
            if im.shape != shape:
                raise InputError(f"stack images differ in size: {im.shape} vs {shape}")
            if im.dtype != np.uint8 or im.ndim != 3 or im.shape[2] != 3:
                raise InputError("stack images must be 8-bit RGB arrays of shape (H, W, 3)")
        times = np.asarray(self.exposure_times, dtype=np.float64)
        if np.any(times <= 0):
            raise InputError("exposure times must be positive")
        steps = np.diff(times)
        if np.all(steps == 0):
            raise CalibrationDegenerateError("all exposure times are equal; no exposure variation")
        if np.any(steps <= 0):
            raise InputError("exposure times must be strictly increasing")


@dataclass(frozen=True)
class CrfCurve:
    """Per-channel log-exposure response ``g`` (shape ``(3, 256)``)."""

    g: np.ndarray
    anchor_code: int = ANCHOR_CODE

    def __post_init__(self):
        if self.g.shape != (3, N_CODES):
            raise InputError(f"expected g of shape (3, 256), got {self.g.shape}")


@dataclass(frozen=True)
class InverseCrf:
    """Extended, normalized inverse response.

    ``table[c, p]`` is the linear value of code ``p`` in channel ``c``;
    ``slope[c]`` is the extension slope in the same normalized units and
    ``scale[c]`` the divisor that was applied to reach ``table[c, 255] == 1``.
    """

    table: np.ndarray
    slope: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if self.table.shape != (3, N_CODES):
            raise InputError(f"expected table of shape (3, 256), got {self.table.shape}")
        if np.any(np.diff(self.table, axis=1) <= 0):
            raise InvalidCurveError("inverse response table is not strictly increasing")

    @property
    def midpoints(self) -> np.ndarray:
        return (self.table[:, :-1] + self.table[:, 1:]) / 2.0


def hat_weights() -> np.ndarray:
    z = np.arange(N_CODES, dtype=np.float64)
    return np.where(z <= (Z_MIN + Z_MAX) // 2, z - Z_MIN, Z_MAX - z)


def sample_positions(height: int, width: int, grid: int) -> tuple[np.ndarray, np.ndarray]:
    ys = ((np.arange(grid) + 0.5) * height / grid).astype(int)
    xs = ((np.arange(grid) + 0.5) * width / grid).astype(int)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return yy.ravel(), xx.ravel()


def solve_response(codes: np.ndarray, log_times: np.ndarray, lambda_smooth: float) -> np.ndarray:
    """Least-squares response for one channel.

    ``codes`` has shape ``(n_samples, n_images)``. Minimizes
    ``sum w(z)(g(z) - lnE - ln dt)^2 + lambda * sum w(z) g''(z)^2`` with
    ``g(128) = 0``.
    """
    w = hat_weights()
    codes = np.asarray(codes, dtype=np.int64)
    # samples saturated in every image carry no information and would make the system rank deficient
    informative = w[codes].sum(axis=1) > 0
    codes = codes[informative]
    n_samples, n_images = codes.shape
    if n_samples == 0 or not np.any(codes.max(axis=1) != codes.min(axis=1)):
        raise CalibrationDegenerateError("no sample pixel changes value across exposures")

    n_unknowns = N_CODES + n_samples
    n_data = n_samples * n_images
    n_smooth = N_CODES - 2
    a = np.zeros((n_data + 1 + n_smooth, n_unknowns))
    b = np.zeros(a.shape[0])

    rows = np.arange(n_data)
    z = codes.ravel()
    sample_idx = np.repeat(np.arange(n_samples), n_images)
    sw = np.sqrt(w[z])
    a[rows, z] = sw
    a[rows, N_CODES + sample_idx] = -sw
    b[:n_data] = sw * np.tile(log_times, n_samples)

    a[n_data, ANCHOR_CODE] = 1.0

    zs = np.arange(1, N_CODES - 1)
    r = n_data + 1 + np.arange(n_smooth)
    sl = np.sqrt(lambda_smooth * w[zs])
    a[r, zs - 1] = sl
    a[r, zs] = -2.0 * sl
    a[r, zs + 1] = sl

    x, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < n_unknowns:
        raise CalibrationDegenerateError(f"singular calibration system (rank {rank} < {n_unknowns})")
    return x[:N_CODES]


def isotonic(values: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators projection onto non-decreasing sequences."""
    means: list[float] = []
    sizes: list[int] = []
    for v in values:
        means.append(float(v))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, s2 = means.pop(), sizes.pop()
            m1, s1 = means.pop(), sizes.pop()
            means.append((m1 * s1 + m2 * s2) / (s1 + s2))
            sizes.append(s1 + s2)
    return np.repeat(means, sizes)


def enforce_monotonic(g: np.ndarray, eps: float = FLAT_EPS, anchor: int = ANCHOR_CODE) -> np.ndarray:
    out = isotonic(g)
    for i in range(1, len(out)):
        if out[i] < out[i - 1] + eps:
            out[i] = out[i - 1] + eps
    return out - out[anchor]


def calibrate_crf(stack: ExposureStack, lambda_smooth: float = 100.0, sample_grid: int = 20,
                  threads: int = 1) -> CrfCurve:
    if lambda_smooth < 0:
        raise InputError("lambda_smooth must be non-negative")
    if sample_grid < 4:
        raise InputError("sample_grid must be at least 4")
    n_images = len(stack.images)
    n_samples = sample_grid * sample_grid
    if n_samples * n_images < N_CODES + n_samples:
        raise InputError(
            f"{n_samples} samples x {n_images} images does not overdetermine the system; "
            "increase the sample grid")
    h, w, _ = stack.images[0].shape
    ys, xs = sample_positions(h, w, sample_grid)
    log_times = np.log(np.asarray(stack.exposure_times, dtype=np.float64))

    def channel(c: int) -> np.ndarray:
        codes = np.stack([im[ys, xs, c] for im in stack.images], axis=1)
        return enforce_monotonic(solve_response(codes, log_times, lambda_smooth))

    with ThreadPoolExecutor(max_workers=max(1, min(threads, 3))) as pool:
        g = np.stack(list(pool.map(channel, range(3))))
    return CrfCurve(g=g, anchor_code=ANCHOR_CODE)


def linear_extension(gamma: np.ndarray) -> tuple[np.ndarray, float]:
    """Replace codes above 250 with a line through ``gamma[250]``.

    The slope is the central difference ``(gamma[251] - gamma[249]) / 2`` of
    the un-extended curve. Returns the extended curve (not normalized) and
    the slope.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    slope = (gamma[KNEE + 1] - gamma[KNEE - 1]) / 2.0
    ext = gamma.copy()
    p = np.arange(KNEE + 1, N_CODES)
    ext[KNEE + 1:] = slope * (p - KNEE) + gamma[KNEE]
    return ext, float(slope)


def inverse_from_gamma(gamma: np.ndarray) -> InverseCrf:
    """Build an :class:`InverseCrf` from per-channel linear-domain curves (3, 256)."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (3, N_CODES):
        raise InputError(f"expected curves of shape (3, 256), got {gamma.shape}")
    tables, slopes, scales = [], [], []
    for c in range(3):
        ext, m = linear_extension(gamma[c])
        if m <= 0 or np.any(np.diff(ext) <= 0):
            raise InvalidCurveError(f"channel {c}: extended inverse response is not strictly increasing")
        top = ext[-1]
        tables.append(ext / top)
        slopes.append(m / top)
        scales.append(top)
    return InverseCrf(table=np.stack(tables), slope=np.array(slopes), scale=np.array(scales))


def extend_linear(curve: CrfCurve) -> InverseCrf:
    if np.any(np.diff(curve.g, axis=1) <= 0):
        raise InvalidCurveError("response curve is not strictly increasing")
    return inverse_from_gamma(np.exp(curve.g))


def identity_inverse() -> InverseCrf:
    ramp = np.arange(N_CODES, dtype=np.float64) / 255.0
    return inverse_from_gamma(np.tile(ramp, (3, 1)))


def gamma_inverse(gamma: float = 2.2) -> InverseCrf:
    ramp = (np.arange(N_CODES, dtype=np.float64) / 255.0) ** gamma
    return inverse_from_gamma(np.tile(ramp, (3, 1)))


def linearize(frame: np.ndarray, inv: InverseCrf) -> np.ndarray:
    if frame.dtype != np.uint8 or frame.ndim != 3 or frame.shape[2] != 3:
        raise InputError("expected an 8-bit RGB frame of shape (H, W, 3)")
    out = np.empty(frame.shape, dtype=np.float64)
    for c in range(3):
        out[..., c] = inv.table[c][frame[..., c]]
    return out


def encode(frame: np.ndarray, inv: InverseCrf) -> tuple[np.ndarray, int]:
    """Map linear values back to codes; returns ``(codes, n_clamped)``.

    Each value goes to the code whose table entry is nearest; a value exactly
    halfway between two entries takes the lower code. Values outside
    ``[0, 1]`` are clamped and counted.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise InputError("expected a linear RGB frame of shape (H, W, 3)")
    outside = (frame < 0.0) | (frame > 1.0) | np.isnan(frame)
    n_clamped = int(outside.sum())
    v = np.clip(np.nan_to_num(frame, nan=0.0), 0.0, 1.0)
    mids = inv.midpoints
    out = np.empty(frame.shape, dtype=np.uint8)
    for c in range(3):
        out[..., c] = np.searchsorted(mids[c], v[..., c], side="left")
    return out, n_clamped


def save_crf(path: str | Path, curve: CrfCurve, inv: InverseCrf) -> None:
    doc = {
        "schema": 1,
        "anchor_code": int(curve.anchor_code),
        "channels": [
            {
                "g": [float(x) for x in curve.g[c]],
                "gamma_ext": [float(x) for x in inv.table[c]],
                "m": float(inv.slope[c]),
                "scale": float(inv.scale[c]),
            }
            for c in range(3)
        ],
    }
    # repr-based float serialization round-trips exactly (17 significant digits)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_crf(path: str | Path) -> tuple[CrfCurve, InverseCrf]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != 1:
        raise InputError(f"{path}: unsupported crf schema {doc.get('schema')!r}")
    chans = doc["channels"]
    if len(chans) != 3:
        raise InputError(f"{path}: expected 3 channels")
    g = np.array([ch["g"] for ch in chans], dtype=np.float64)
    table = np.array([ch["gamma_ext"] for ch in chans], dtype=np.float64)
    inv = InverseCrf(
        table=table,
        slope=np.array([ch["m"] for ch in chans], dtype=np.float64),
        scale=np.array([ch.get("scale", 1.0) for ch in chans], dtype=np.float64),
    )
    return CrfCurve(g=g, anchor_code=int(doc["anchor_code"])), inv
