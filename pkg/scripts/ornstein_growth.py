"""Lower bounds for sup ||Du||_1 / ||eps(u)||_1 over zero-boundary fields on a resolution ladder.

Writes one CSV row per level; the ratio growing without bound is the
discrete face of the missing L^1 Korn inequality.
"""

import argparse
import time

from bdvarmin.io import write_table
from bdvarmin.spaces import ornstein_ladder


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--iters", type=int, nargs="+", default=[15, 15, 8])
    ap.add_argument("--out", default="out/ornstein.csv")
    args = ap.parse_args()
    iters = args.iters if len(args.iters) == len(args.cells) else args.iters[0]
    t0 = time.perf_counter()
    ladder = ornstein_ladder(tuple(args.cells), iters)
    rows = [{"cells": r.n, "h": r.h, "ratio": r.ratio, "ascent_steps": len(r.history)} for r in ladder]
    for r in rows:
        print(f"cells={r['cells']:3d} ratio={r['ratio']:.6f} steps={r['ascent_steps']}")
    print(f"{time.perf_counter() - t0:.1f}s -> {write_table(args.out, rows)}")


if __name__ == "__main__":
    main()
