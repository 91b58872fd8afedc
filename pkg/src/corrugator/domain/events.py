from dataclasses import dataclass, field
from typing import Any, List

@dataclass
class StageStarted:
    pipeline: str
    index: int
    d_norm: str

@dataclass
class LambdaCandidateRejected:
    stage: int
    step: int
    lam: str
    reasons: List[str] = field(default_factory=list)
    b_norm: str = ""

@dataclass
class LambdaSelected:
    stage: int
    step: int
    lam: str
    region: str
    b_norm: str = ""

@dataclass
class StepCompleted:
    pipeline: str
    stage: int
    step: int
    lam: str
    v_change: str = ""

@dataclass
class BoundChecked:
    pipeline: str
    stage: int
    step: int
    name: str
    passed: bool
    worst_ratio: str = ""

@dataclass
class StageFinished:
    pipeline: str
    index: int
    passed: bool
    d_norm: str
    d_tilde_norm: str

@dataclass
class SweepRowFinished:
    sigma: str
    d3_norm: str
    error: str = ""

@dataclass
class StepFields:
    """(v_k, w_k) after one corrugation, for collectors such as mesh export."""

    pipeline: str
    stage: int
    step: int
    v: Any
    w: Any

@dataclass
class ArtifactWritten:
    kind: str
    path: str


def emit(hub: Any, evt: Any) -> None:
    """Publish on ``hub`` when one is wired; pipelines also run without one."""
    if hub is not None:
        hub.publish(evt)
