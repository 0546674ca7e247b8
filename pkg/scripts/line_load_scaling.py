#!/usr/bin/env python3
"""Check the elementwise line-load representative under refinement.

Prints h, ||f_h||_L2, and the product h * ||f_h||, which stays bounded when
each element carries at most O(h) of curve.
"""

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from linedg import basis as fb  # noqa: E402
from linedg.curve import Curve, compute_fh_field  # noqa: E402
from linedg.mesh import BoxDomain, build_box_mesh  # noqa: E402
from linedg.norms import l2_error  # noqa: E402


def main():
    domain = BoxDomain(lo=[0, 0, 0], hi=[1, 1, 0.25])
    curve = Curve([[2 / 3, 1 / 3, 0.0], [2 / 3, 1 / 3, 0.25]])
    print(f"{'n':>12} {'h':>10} {'||f_h||':>12} {'h*||f_h||':>12}")
    for m in (1, 2, 4, 8):
        n = (4 * m, 4 * m, m)
        mesh = build_box_mesh(domain, n)
        fh = compute_fh_field(curve, 1.0, mesh, fb.make_basis(1))
        norm = l2_error(fh, 0.0)
        print(f"{str(n):>12} {mesh.h:>10.5f} {norm:>12.5f} {mesh.h * norm:>12.5f}")


if __name__ == "__main__":
    main()
