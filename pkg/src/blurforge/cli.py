"""Command-line entry point: calibrate, synthesize, annotate, evaluate, verify-kernels.

Exit status is 0 on success, 1 for usage or validation errors and 2 for
failures while running.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

import blurforge
from blurforge import annotate, crf, io, metrics, synth
from blurforge.annotate import DepthFrame
from blurforge.errors import (
    CalibrationDegenerateError,
    ConfigurationError,
    DegenerateDepthError,
    InputError,
    InvalidCurveError,
    UnlabeledError,
)

log = logging.getLogger("blurforge")

VALIDATION_ERRORS = (InputError, ConfigurationError, CalibrationDegenerateError, InvalidCurveError,
                     UnlabeledError, DegenerateDepthError)
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".tif", ".tiff"}
CSV_COLUMNS = ["clip", "index", "psnr", "ssim", "proximity", "environment", "motion", "mean_confidence"]


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def default_threads() -> int:
    env = os.environ.get("BLURFORGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"BLURFORGE_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def toolkit() -> dict:
    return {"name": "blurforge", "version": blurforge.__version__}


def require_file(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {p}")
    return p


def require_dir(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise InputError(f"{what} not found: {p}")
    return p


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


# calibrate ----------------------------------------------------------------

def read_times(path: Path, names: list[str]) -> list[float]:
    """Exposure times from JSON (list or name->time map) or CSV (``time`` or ``name,time`` rows)."""
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        if isinstance(doc, dict):
            try:
                return [float(doc[n]) for n in names]
            except KeyError as e:
                raise InputError(f"{path}: no exposure time for {e.args[0]}")
        times = [float(t) for t in doc]
    else:
        rows = [r for r in csv.reader(path.read_text().splitlines()) if r and r[0].strip()]
        if rows and not _is_number(rows[0][-1]):
            rows = rows[1:]
        if rows and len(rows[0]) >= 2:
            table = {r[0].strip(): float(r[1]) for r in rows}
            try:
                return [table[n] for n in names]
            except KeyError as e:
                raise InputError(f"{path}: no exposure time for {e.args[0]}")
        times = [float(r[0]) for r in rows]
    if len(times) != len(names):
        raise InputError(f"{path}: {len(times)} exposure times for {len(names)} images")
    return times


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def cmd_calibrate(args) -> int:
    stack_dir = require_dir(args.stack, "stack directory")
    times_path = require_file(args.times, "exposure times file")
    files = sorted(p for p in stack_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if len(files) < 2:
        raise InputError(f"{stack_dir}: need at least 2 images, found {len(files)}")
    times = read_times(times_path, [p.name for p in files])
    order = np.argsort(times, kind="stable")
    images = [io.read_rgb(files[i]) for i in order]
    stack = crf.ExposureStack(images=images, exposure_times=[times[i] for i in order])
    curve = crf.calibrate_crf(stack, lambda_smooth=args.lambda_smooth, sample_grid=args.grid, threads=args.threads)
    inv = crf.extend_linear(curve)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    crf.save_crf(out, curve, inv)
    log.info("wrote %s (%d images, lambda=%g, grid=%d)", out, len(images), args.lambda_smooth, args.grid)
    return 0


# synthesize ---------------------------------------------------------------

def cmd_synthesize(args) -> int:
    manifest_path = require_file(args.manifest, "manifest")
    _, inv = crf.load_crf(require_file(args.crf, "crf file"))
    clips = io.load_manifest(manifest_path)
    base = manifest_path.parent
    cfg = synth.SynthConfig(crf=inv, interp_factor=args.interp_factor, window=args.window)
    interp_dir = require_dir(args.interpolated_dir, "interpolated directory") if args.interpolated_dir else None

    for clip in clips:
        clip.require_source()
        for rel in clip.frames + clip.depth + clip.confidence:
            require_file(base / rel, f"clip {clip.clip_id!r} file")

    out = Path(args.out)
    out_clips, summary = [], []
    for clip in sorted(clips, key=lambda c: c.clip_id):
        interpolated = None
        if interp_dir is not None:
            d = require_dir(interp_dir / clip.clip_id, f"interpolated frames for clip {clip.clip_id!r}")
            interpolated = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        result = synth.run_pipeline(clip, cfg, base_dir=base, interpolated=interpolated, threads=args.threads)
        summary.append({"clip_id": clip.clip_id, "samples": len(result.samples), "skipped": result.skipped,
                        "source_indices": [s.source_index for s in result.samples]})
        if result.skipped:
            continue
        synth.write_samples(out, clip.clip_id, result.samples)
        out_clips.append(result.manifest)

    out.mkdir(parents=True, exist_ok=True)
    io.dump_manifest(out / "clips.json", out_clips)
    io.dump_report(out / "synth_report.json", {
        "toolkit": toolkit(),
        "command": "synthesize",
        "seed": None,
        "config": {"manifest": str(args.manifest), "crf": str(args.crf), "interp_factor": args.interp_factor,
                   "window": args.window, "interpolated_dir": args.interpolated_dir},
        "clips": summary,
    })
    log.info("synthesized %d samples from %d clips", sum(s["samples"] for s in summary), len(clips))
    return 0


# annotate -----------------------------------------------------------------

def load_attrs(path: Path) -> dict[str, dict]:
    doc = json.loads(path.read_text())
    if isinstance(doc, dict) and "clips" in doc:
        if doc.get("schema", 1) != 1:
            raise InputError(f"{path}: unsupported attrs schema {doc.get('schema')!r}")
        doc = doc["clips"]
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a mapping of clip id to attributes")
    for clip_id, a in doc.items():
        extra = set(a) - {"environment", "motion"}
        if extra:
            raise InputError(f"{path}: clip {clip_id!r} has unknown attribute fields {sorted(extra)}")
    return doc


def read_depth_frame(base: Path, depth_rel: str, conf_rel: str) -> DepthFrame:
    mm = io.read_gray16(base / depth_rel)
    conf = io.read_gray8(base / conf_rel)
    return DepthFrame(depth=io.depth_from_mm(mm), confidence=conf.astype(np.float64) / 255.0)


def cmd_annotate(args) -> int:
    manifest_path = require_file(args.manifest, "manifest")
    attrs = load_attrs(require_file(args.attrs, "attributes file"))
    clips = io.load_manifest(manifest_path)
    base = manifest_path.parent
    for clip in clips:
        if clip.clip_id not in attrs:
            raise InputError(f"no clip-level attributes for {clip.clip_id!r}")
        for rel in clip.depth + clip.confidence:
            require_file(base / rel, f"clip {clip.clip_id!r} file")

    frames, clip_attrs = [], {}
    for clip in sorted(clips, key=lambda c: c.clip_id):
        a = attrs[clip.clip_id]
        clip_attrs[clip.clip_id] = {"environment": a["environment"], "motion": a["motion"]}
        depth = [read_depth_frame(base, d, c) for d, c in zip(clip.depth, clip.confidence)]
        frames.extend(annotate.annotate_frames(clip.clip_id, depth, a["environment"], a["motion"], args.tie_break))
    io.dump_report(args.out, {
        "toolkit": toolkit(),
        "command": "annotate",
        "config": {"manifest": str(args.manifest), "attrs": str(args.attrs), "tie_break": args.tie_break},
        "clips": clip_attrs,
        "frames": frames,
    })
    return 0


# evaluate -----------------------------------------------------------------

def frame_files(root: Path, subdir: str | None) -> dict[tuple[str, int], Path]:
    found = {}
    for clip_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        d = clip_dir / subdir if subdir else clip_dir
        if not d.is_dir():
            continue
        for f in sorted(d.iterdir()):
            if f.suffix.lower() in IMAGE_SUFFIXES and f.stem.isdigit():
                found[(clip_dir.name, int(f.stem))] = f
    return found


def score_dir(pred: dict, gt: dict, ssim_mode: str) -> list[metrics.FramePairMetrics]:
    missing = sorted(k for k in pred if k not in gt)
    if missing:
        raise InputError(f"no ground truth for frames: {missing}")
    return [metrics.score_pair(k[0], k[1], io.read_rgb(pred[k]), io.read_rgb(gt[k]), ssim_mode) for k in sorted(pred)]


def load_annotations(path: Path) -> dict[tuple[str, int], dict]:
    doc = json.loads(path.read_text())
    return {(f["clip"], int(f["index"])): f for f in doc["frames"]}


def cmd_evaluate(args) -> int:
    pred_dir = require_dir(args.pred, "prediction directory")
    gt_dir = require_dir(args.gt, "ground-truth directory")
    pred_b_dir = require_dir(args.pred_b, "second prediction directory") if args.pred_b else None
    annotations = load_annotations(require_file(args.annotations, "annotations file"))
    annotate.n_bins(args.bin_width)

    gt = frame_files(gt_dir, args.gt_subdir)
    pred = frame_files(pred_dir, args.pred_subdir)
    if not pred:
        raise InputError(f"no frames found under {pred_dir}")
    run_a = score_dir(pred, gt, args.ssim_mode)
    report_a = metrics.aggregate_by_attribute(run_a, annotations)

    rows = []
    for m in run_a:
        ann = annotations.get(m.key, {})
        rows.append({"clip": m.clip, "index": m.index, "psnr": m.psnr, "ssim": m.ssim,
                     "proximity": ann.get("proximity", ""), "environment": ann.get("environment", ""),
                     "motion": ann.get("motion", ""), "mean_confidence": ann.get("mean_confidence", "")})
    report = {
        "toolkit": toolkit(),
        "command": "evaluate",
        "seed": None,
        "config": {"pred": str(args.pred), "gt": str(args.gt), "pred_b": args.pred_b,
                   "annotations": str(args.annotations), "ssim_mode": args.ssim_mode,
                   "bin_width": args.bin_width, "pred_subdir": args.pred_subdir, "gt_subdir": args.gt_subdir},
        "frames": rows,
        "run_a": report_a.to_dict(),
    }
    columns = list(CSV_COLUMNS)
    if pred_b_dir is not None:
        pred_b = frame_files(pred_b_dir, args.pred_subdir)
        run_b = score_dir(pred_b, gt, args.ssim_mode)
        report["run_b"] = metrics.aggregate_by_attribute(run_b, annotations).to_dict()
        scored = {m.key for m in run_a}
        no_conf = sorted(k for k in scored if k not in annotations)
        if no_conf:
            raise InputError(f"no annotations (confidence) for frames: {no_conf}")
        conf = {k: float(annotations[k]["mean_confidence"]) for k in scored}
        report["gain_by_confidence"] = metrics.gain_by_confidence(run_a, run_b, conf, args.bin_width)
        by_key = {m.key: m for m in run_b}
        for row in rows:
            mb = by_key.get((row["clip"], row["index"]))
            row["psnr_b"] = mb.psnr if mb else ""
            row["ssim_b"] = mb.ssim if mb else ""
        columns += ["psnr_b", "ssim_b"]
    io.dump_report(args.out, report)
    if args.csv:
        io.write_csv(args.csv, columns, rows)
    return 0


# verify-kernels -----------------------------------------------------------

def cmd_verify_kernels(args) -> int:
    from blurforge.kernels import DatWeights
    from blurforge.kernels.verify import run_suite

    suite = run_suite(seed=args.seed, cases=args.cases)
    report = {
        "toolkit": toolkit(),
        "command": "verify-kernels",
        "seed": args.seed,
        "config": {"cases": args.cases},
        "passed": suite.passed,
        "checks": [c.to_dict() for c in suite.checks.values()],
    }
    io.dump_report(args.out, report)
    if args.save_weights:
        rng = np.random.default_rng(args.seed)
        DatWeights.random(4, 4, heads=2, rng=rng).astype(np.float32).save(args.save_weights)
    for c in suite.checks.values():
        log.info("%-45s %s  max dev %.3g (tol %.0e, %d cases)", c.name, "PASS" if c.passed else "FAIL",
                 c.max_deviation, c.tolerance, c.cases)
    return 0 if suite.passed else 2


def build_parser() -> Parser:
    p = Parser(prog="blurforge", description=__doc__.splitlines()[0])
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    p.add_argument("--threads", type=positive_int, default=None,
                   help="worker threads (default: $BLURFORGE_THREADS or CPU count)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    c = sub.add_parser("calibrate", help="recover the camera response from an exposure stack")
    c.add_argument("--stack", required=True)
    c.add_argument("--times", required=True, help="exposure times, CSV or JSON")
    c.add_argument("--lambda", dest="lambda_smooth", type=nonneg_float, default=100.0)
    c.add_argument("--grid", type=int, default=20, help="sample pixels per axis (>= 4)")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("synthesize", help="average interpolated frames into blurry/sharp/depth samples")
    s.add_argument("--manifest", required=True)
    s.add_argument("--crf", required=True)
    s.add_argument("--interp-factor", type=positive_int, default=8)
    s.add_argument("--window", type=positive_int, default=32)
    s.add_argument("--interpolated-dir", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synthesize)

    a = sub.add_parser("annotate", help="per-frame proximity and confidence annotations")
    a.add_argument("--manifest", required=True)
    a.add_argument("--attrs", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--tie-break", choices=["near", "far"], default="near")
    a.set_defaults(func=cmd_annotate)

    e = sub.add_parser("evaluate", help="PSNR/SSIM with attribute and confidence slicing")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--pred-b", default=None)
    e.add_argument("--annotations", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--csv", default=None)
    e.add_argument("--ssim-mode", choices=["luma", "channels"], default="luma")
    e.add_argument("--bin-width", type=float, default=0.1)
    e.add_argument("--pred-subdir", default=None, help="frames live in <pred>/<clip>/<subdir>/")
    e.add_argument("--gt-subdir", default=None, help="frames live in <gt>/<clip>/<subdir>/")
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("verify-kernels", help="check the reference kernels against loop oracles")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=positive_int, default=20)
    v.add_argument("--out", required=True)
    v.add_argument("--save-weights", default=None, help="also write a random weight fixture as JSON")
    v.set_defaults(func=cmd_verify_kernels)
    return p


def dispatch(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads is None:
            args.threads = default_threads()
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except VALIDATION_ERRORS as e:
        print(f"blurforge {args.command}: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"blurforge {args.command}: failed: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
