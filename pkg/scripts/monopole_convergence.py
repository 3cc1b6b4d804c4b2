#!/usr/bin/env python3
"""Grid refinement study for the marching monopole solver on the dKP space."""

import argparse
import math

import numpy as np

from asdkit import einstein_weyl as ew
from asdkit.fields import ScalarField, parse_expr

BOX = ((-1.5, -0.5), (-0.5, 0.5), (-1.5, -0.5))
EXACT = "y^2 + (2/3)*x*t + x/t^2 - 1/t"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=str, default="9,13,17,25")
    args = ap.parse_args()
    sizes = [int(v) for v in args.sizes.split(",")]
    space = ew.dkp_ew()
    exact = parse_expr(EXACT, ew.EW_NAMES)
    errs = []
    for k, n in enumerate(sizes):
        grid = ew.Grid3.uniform(BOX, (n, n, n))
        sol = ew.monopole_solve_linear(space, grid, exact, 0)
        ref = ScalarField(exact, ew.EW_NAMES).values(list(grid.mesh()))
        errs.append(float(np.max(np.abs(sol.V - ref))))
        rate = "" if len(errs) < 2 else f"  order {math.log(errs[-2] / errs[-1]) / math.log((n - 1) / (sizes[k - 1] - 1)):.2f}"
        print(f"n={n:3d}  max error {errs[-1]:.3e}  residual {sol.residual:.2e}{rate}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
