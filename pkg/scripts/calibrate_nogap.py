"""Slope of the no-gap tolerance: (relaxed - inf_j F_j[v_j]) / h on quadratic runs.

``NOGAP_C`` in ``bdvarmin.relaxation`` must dominate every printed slope.
Negative slopes mean the one-sided check holds with room to spare.
"""

import argparse

from bdvarmin.cli import U0_GENERATORS, make_u0, parse_grid
from bdvarmin.integrands import make_quadratic
from bdvarmin.relaxation import NOGAP_C, nogap_check
from bdvarmin.solver import Schedule


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--jmax", type=int, default=64)
    args = ap.parse_args()
    f = make_quadratic()
    worst = float("-inf")
    for n in args.cells:
        dom = parse_grid(f"{n}x{n}")
        for name in sorted(U0_GENERATORS):
            rep = nogap_check(f, make_u0(name, dom), Schedule.dyadic(args.jmax))
            slope = (rep.relaxed - rep.inf_sequence) / dom.h
            worst = max(worst, slope)
            print(f"cells={n:3d} u0={name:6s} relaxed={rep.relaxed:.12g} inf={rep.inf_sequence:.12g} "
                  f"dual={rep.dual_lower:.12g} slope={slope:+.3e}")
    print(f"largest slope {worst:+.3e}; NOGAP_C = {NOGAP_C}")


if __name__ == "__main__":
    main()
