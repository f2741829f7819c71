#!/usr/bin/env python3
"""Write the synthetic PPM fixture images used by the experiments."""

import argparse
from pathlib import Path

from fsolink.core import write_ppm
from fsolink.fixtures import synthetic_image


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="fixtures")
    ap.add_argument("--size", type=int, nargs=2, default=(128, 128), metavar=("H", "W"))
    ap.add_argument("--seeds", type=int, nargs="*", default=[11, 12, 13, 14])
    ap.add_argument("--paper-frame", action="store_true",
                    help="also write one 512x768 frame (seed 3)")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h, w = args.size
    for s in args.seeds:
        path = out / f"im_{h}x{w}_s{s}.ppm"
        write_ppm(synthetic_image(h, w, s), path)
        print(path)
    if args.paper_frame:
        path = out / "im_512x768_s3.ppm"
        write_ppm(synthetic_image(512, 768, 3), path)
        print(path)


if __name__ == "__main__":
    main()
