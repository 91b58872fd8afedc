"""
Built-in runs: the two C¹ examples on (−0.5, 0.5)² and the three
C^{1,α} examples on (−1, 1)².

Each example is a run config in the same schema as user files
(docs/config.md), plus the reference values the runs are compared with.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Dict, List

from ..domain.errors import ConfigurationError

_HALF = ["-0.5", "0.5", "-0.5", "0.5"]
_UNIT = ["-1", "1", "-1", "1"]

# [1 − 10⁻¹⁹, 1]² and [1 − 2·10⁻²¹, 1]² written out exactly
_CORNER_19 = ["0.9999999999999999999", "1", "0.9999999999999999999", "1"]
_CORNER_21 = ["0.999999999999999999998", "1", "0.999999999999999999998", "1"]


@dataclass(frozen=True)
class Example:
    name: str
    title: str
    config: Dict[str, Any]
    reference: Dict[str, Any] = field(default_factory=dict)

    def run_config(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)


def _c1(name: str, v0: str, w0: List[str], a: str, f: str) -> Dict[str, Any]:
    return {
        "name": name,
        "pipeline": "c1",
        "domain": list(_HALF),
        "f": f,
        "v0": v0,
        "w0": w0,
        "A": [a, "0", a],
        "eps": "0.1",
        "stage": {"mode": "search", "delta": "0.5", "method": "fd", "stageBudget": 1},
        "grid": {"h": "0.002", "subwindowH": "0.0001"},
    }


def _holder(name: str, v0: str, a: str, f: str, subwindow: List[str]) -> Dict[str, Any]:
    return {
        "name": name,
        "pipeline": "holder",
        "domain": list(_UNIT),
        "f": f,
        "v0": v0,
        "w0": ["0", "0"],
        "A": [a, "0", a],
        "subwindow": list(subwindow),
        "precision": {"digits": 50},
        "holder": {"sigma": "35", "lam1": "1e19", "stageBudget": 1},
        "grid": {"subwindowH": "1e-23"},
    }


EXAMPLES: Dict[str, Example] = {
    e.name: e
    for e in (
        Example(
            "ex3.1",
            "v0 = x^2 - y^2 towards det D^2 v = 1",
            _c1("ex3.1", "x^2 - y^2", ["x*y^2", "x^2*y"], "5 - (x^2+y^2)/4", "1"),
            {
                "lambdas": ["5", "50", "1000"],
                "v_change": "0.0995",
                "b_ratio": "0.1339",
                "min_phi": ["0.79", "1.14", "1.14"],
            },
        ),
        Example(
            "ex3.2",
            "v0 = x^2 + y^2 towards det D^2 v = -1",
            _c1("ex3.2", "x^2 + y^2", ["-x*y^2", "-x^2*y"], "5 + (x^2+y^2)/4", "-1"),
            {
                "lambdas": ["5", "57", "1100"],
                "min_phi": ["0.94", "1.29", "1.28"],
            },
        ),
        Example(
            "ex6.1",
            "v0 = 0 towards det D^2 v = -1e-18",
            _holder("ex6.1", "0", "-1e-18*(x^2+y^2)", "-1e-18", _CORNER_19),
            {"d_norm": "1.41e-18", "d3_sigma35": "9.7e-19", "d3_sigma10": "0.332e-17"},
        ),
        Example(
            "ex6.2",
            "v0 = 0 towards det D^2 v = 1e-18",
            _holder("ex6.2", "0", "1e-18*(x^2+y^2)", "1e-18", _CORNER_21),
            {"d_norm": "1.41e-18", "d3_sigma35": "9.1e-19", "hess_v3_sigma1e8": "2.99e27"},
        ),
        Example(
            "ex6.3",
            "v0 = 1e-9 (x^2 + y^2) towards det D^2 v = 0",
            _holder("ex6.3", "1e-9*(x^2+y^2)", "0", "0", _CORNER_19),
            {"d_norm": "4e-18", "d3_sigma35": "9.5e-19"},
        ),
    )
}


def example_names() -> List[str]:
    return sorted(EXAMPLES)


def get_example(name: str) -> Example:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise ConfigurationError(
            "unknown example {0!r}, expected one of {1}".format(name, ", ".join(example_names()))
        ) from None
