# -*- coding: utf-8 -*-
"""
03_phase_precision.py

Diagnostic: why the C^{1,alpha} examples need 50 digits. Evaluates
sin(2*pi*lambda*x) near x = 1 for the stage frequencies in float64 and at
extended precision, and shows which precisions the frequency guard accepts.

Usage:
    python tools/diagnostics/03_phase_precision.py
Expected:
    - float64 values are noise once lambda*x exceeds about 1e16.
    - guard=ok only for digits >= 33 at lambda = 1.225e22.
"""

from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path

HERE = Path(__file__).resolve()
PROJECT_ROOT = HERE.parents[2]
SRC = PROJECT_ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from corrugator.core.expr import eval_jet, parse
from corrugator.core.field import Rect
from corrugator.core.holder import check_frequency_precision
from corrugator.core.numeric import format_real, make_context
from corrugator.domain.errors import PreconditionError


def main() -> int:
    dctx, mctx = make_context(15, 0), make_context(50, 0)
    x = "0.9999999999999999999"
    corner = Rect(x, 1, x, 1)
    for lam in ("1e19", "35e19", "1225e19"):
        f = parse("sin(2*pi*{0}*x)".format(lam))
        d = eval_jet(f, (float(Fraction(x)), 0.0), 0, dctx).value
        m = eval_jet(f, (x, "0"), 0, mctx).value
        print("DIAG: lambda={0} float64={1!r} digits50={2}".format(lam, d, format_real(m, mctx)))
        for digits in (15, 30, 33, 50):
            try:
                check_frequency_precision(Fraction(lam), corner, make_context(digits, 0))
                verdict = "ok"
            except PreconditionError as exc:
                verdict = "refused ({0})".format(exc)
            print("DIAG:   digits={0} guard={1}".format(digits, verdict))
    return 0


if __name__ == "__main__":
    sys.exit(main())
