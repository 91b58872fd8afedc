"""
Run reports.

Every real number is stored as decimal text so that extended-precision
values survive the JSON round trip; flags are recomputed from these texts by
``corrugator verify``.
"""

from __future__ import annotations

from dataclasses import MISSING, asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Type, TypeVar

from .errors import ReportSchemaError

SCHEMA_VERSION = 1

T = TypeVar("T")


@dataclass
class BoundCheck:
    """A pointwise inequality measured <= bound at ``count`` sample points."""

    name: str
    passed: bool
    count: int
    measured: List[str]
    bound: List[str]
    scale: List[str]
    tolerance: str
    worst_ratio: str
    worst_point: List[str] = field(default_factory=list)
    note: str = ""


@dataclass
class ScalarCheck:
    """A single inequality lhs <= rhs between recorded numbers."""

    name: str
    lhs: str
    rhs: str
    passed: bool
    tolerance: str = "0"


@dataclass
class LambdaCandidate:
    lam: str
    accepted: bool
    reasons: List[str]
    b_norm: str
    region: str


@dataclass
class StepRecord:
    k: int
    lam: str
    h: str = ""
    region: str = ""
    b_norm: str = ""
    min_phi: List[str] = field(default_factory=list)
    v_change: str = ""
    candidates: List[LambdaCandidate] = field(default_factory=list)
    checks: List[BoundCheck] = field(default_factory=list)
    extra: Dict[str, str] = field(default_factory=dict)


@dataclass
class StageReport:
    pipeline: str
    index: int
    mode: str
    d_norm: str
    d_tilde_norm: str
    lambdas: List[str]
    v_change: str
    passed: bool
    steps: List[StepRecord] = field(default_factory=list)
    checks: List[ScalarCheck] = field(default_factory=list)
    bounds: List[BoundCheck] = field(default_factory=list)
    min_phi_in: List[str] = field(default_factory=list)
    min_phi_out: List[str] = field(default_factory=list)
    norms: Dict[str, str] = field(default_factory=dict)
    extra: Dict[str, str] = field(default_factory=dict)

    def failed_checks(self) -> List[str]:
        names = [c.name for c in self.checks if not c.passed]
        names.extend(b.name for b in self.bounds if not b.passed)
        for step in self.steps:
            names.extend("step{0}.{1}".format(step.k, c.name) for c in step.checks if not c.passed)
        return names


@dataclass
class RunMetadata:
    version: str
    settings_digest: str
    seed: int
    digits: int
    wall_seconds: float = 0.0
    peak_rss_bytes: int = 0
    started: str = ""


@dataclass
class RunReport:
    pipeline: str
    name: str
    metadata: RunMetadata
    status: str = "ok"
    error: str = ""
    stages: List[StageReport] = field(default_factory=list)
    trace: List[Dict[str, str]] = field(default_factory=list)
    artifacts: Dict[str, str] = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(data: Any) -> "RunReport":
        if not isinstance(data, dict):
            raise ReportSchemaError("report root must be an object")
        if data.get("schema") != SCHEMA_VERSION:
            raise ReportSchemaError(
                "unsupported report schema {0!r}, expected {1}".format(data.get("schema"), SCHEMA_VERSION)
            )
        return _build(RunReport, data, "report")


# ---------- nested construction with schema errors ----------

_NESTED: Dict[str, Type[Any]] = {
    "metadata": RunMetadata,
    "stages": StageReport,
    "steps": StepRecord,
    "checks": None,  # resolved by owner type below
    "candidates": LambdaCandidate,
    "bounds": BoundCheck,
}


def _build(cls: Type[T], data: Any, where: str) -> T:
    if not isinstance(data, dict):
        raise ReportSchemaError("{0}: expected an object".format(where))
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            if f.default is not MISSING or f.default_factory is not MISSING:
                continue
            raise ReportSchemaError("{0}: missing field {1!r}".format(where, f.name))
        value = data[f.name]
        kwargs[f.name] = _convert(cls, f.name, value, "{0}.{1}".format(where, f.name))
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ReportSchemaError("{0}: {1}".format(where, exc)) from exc


def _item_type(owner: Type[Any], name: str) -> Optional[Type[Any]]:
    if name == "checks":
        return BoundCheck if owner is StepRecord else ScalarCheck
    return _NESTED.get(name)


def _convert(owner: Type[Any], name: str, value: Any, where: str) -> Any:
    item = _item_type(owner, name)
    if item is None:
        return value
    if name == "metadata":
        return _build(item, value, where)
    if not isinstance(value, list):
        raise ReportSchemaError("{0}: expected a list".format(where))
    return [_build(item, v, "{0}[{1}]".format(where, i)) for i, v in enumerate(value)]
