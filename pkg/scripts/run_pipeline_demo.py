"""Run calibrate, synthesize, annotate, evaluate and verify-kernels on the fixture data."""

import argparse
import json
import sys
from pathlib import Path

from blurforge import fixtures as fx
from blurforge.cli import dispatch


def step(argv):
    print("blurforge", " ".join(argv))
    code = dispatch(argv)
    if code:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("work", type=Path)
    ap.add_argument("--interp-factor", default="8")
    ap.add_argument("--window", default="32")
    args = ap.parse_args()
    w = args.work
    fx.write_fixture_clip(w / "data")
    fx.write_exposure_stack(w / "stack")

    step(["calibrate", "--stack", str(w / "stack"), "--times", str(w / "stack" / "times.json"),
          "--out", str(w / "crf.json")])
    step(["synthesize", "--manifest", str(w / "data" / "clips.json"), "--crf", str(w / "crf.json"),
          "--interp-factor", args.interp_factor, "--window", args.window, "--out", str(w / "synth")])
    step(["annotate", "--manifest", str(w / "synth" / "clips.json"), "--attrs", str(w / "data" / "clip_attrs.json"),
          "--out", str(w / "annotations.json")])
    step(["evaluate", "--pred", str(w / "synth"), "--pred-subdir", "blur", "--gt", str(w / "synth"),
          "--gt-subdir", "gt", "--annotations", str(w / "annotations.json"), "--out", str(w / "report.json"),
          "--csv", str(w / "report.csv")])
    step(["verify-kernels", "--seed", "42", "--out", str(w / "kernels.json")])

    report = json.loads((w / "report.json").read_text())
    print(json.dumps(report["run_a"]["overall"], indent=1))


if __name__ == "__main__":
    main()
