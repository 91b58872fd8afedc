# -*- coding: utf-8 -*-
"""
02_step_error_decay.py

Diagnostic: the defect left by one corrugation shrinks like 1/lambda.
For a fixed curved v and a variable amplitude, prints the largest measured
defect error and its ratio to the pointwise estimate for several lambdas.

Usage:
    python tools/diagnostics/02_step_error_decay.py [digits]
Expected:
    - measured*lambda roughly constant across the lines.
    - worst_ratio <= 1 on every line.
"""

from __future__ import annotations

import sys
from pathlib import Path

HERE = Path(__file__).resolve()
PROJECT_ROOT = HERE.parents[2]
SRC = PROJECT_ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from corrugator.core.corrugation import StepParams, measure_step, one_step
from corrugator.core.expr import X, ZERO, parse
from corrugator.core.field import Rect, Vec2
from corrugator.core.numeric import make_context, sample_points


def main(argv) -> int:
    digits = int(argv[1]) if len(argv) > 1 else 15
    ctx = make_context(digits, 0)
    rect = Rect(0, 1, 0, 1)
    pts = sample_points(rect, 500, ctx)
    v = X * X / 2 + parse("x*y/3")
    w = Vec2(ZERO, ZERO)
    a = parse("1 + x/4 - y/8")
    for lam in (10, 100, 1000, 10000):
        p = StepParams(a, 2, lam)
        v_new, w_new = one_step(v, w, p)
        checks, _ = measure_step(v, w, v_new, w_new, p, pts, ctx)
        err = next(c for c in checks if c.name == "defect_error")
        with ctx.workdps():
            worst = max(float(m) for m in err.measured)
        print(
            "DIAG: lambda={0} measured={1:.6e} measured*lambda={2:.6f} worst_ratio={3} passed={4}".format(
                lam, worst, worst * lam, err.worst_ratio, err.passed
            )
        )
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
