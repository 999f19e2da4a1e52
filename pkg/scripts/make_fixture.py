"""Write the synthetic fixture clip and a gamma-2.2 exposure stack to a directory."""

import argparse
from pathlib import Path

from blurforge import fixtures as fx


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path)
    ap.add_argument("--frames", type=int, default=9)
    ap.add_argument("--fps", type=float, default=60.0)
    ap.add_argument("--gamma", type=float, default=2.2)
    args = ap.parse_args()
    manifest = fx.write_fixture_clip(args.out / "data", n_frames=args.frames, fps=args.fps)
    stack = fx.write_exposure_stack(args.out / "stack", gamma=args.gamma)
    print(f"clip manifest: {manifest}")
    print(f"exposure stack: {stack}")


if __name__ == "__main__":
    main()
