# -*- coding: utf-8 -*-
"""
01_kernel_norms.py

Diagnostic: L1 norms of the mollifier and its first three derivatives for
growing quadrature node counts, next to the bounds the holder stage uses.

Usage:
    python tools/diagnostics/01_kernel_norms.py
Expected:
    - One DIAG line per node count; the values settle after the first doubling.
    - norm[0] stays within 1e-7 of 1.
"""

from __future__ import annotations

import sys
from pathlib import Path

# ---- ensure src on sys.path ----
HERE = Path(__file__).resolve()
PROJECT_ROOT = HERE.parents[2]
SRC = PROJECT_ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from corrugator.core.mollify import KERNEL_NORM_BOUNDS, kernel_constant, kernel_norms
from corrugator.core.numeric import make_context


def main() -> int:
    ctx = make_context(30, 0)
    print("DIAG: kernel_constant={0}".format(kernel_constant(ctx)))
    for n in (1000, 2000, 4000):
        norms = kernel_norms(quadrature_n=n)
        cells = " ".join("m{0}={1:.9g}".format(m, v) for m, v in enumerate(norms.values))
        print("DIAG: n={0} nodes={1} {2}".format(n, norms.nodes, cells))
    print("DIAG: bounds " + " ".join("m{0}<={1}".format(m, float(b)) for m, b in enumerate(KERNEL_NORM_BOUNDS)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
