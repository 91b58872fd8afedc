"""
Typed view of a merged run config.

Everything the pipelines need is validated here, before any numerics run:
expressions parse, rectangles are well formed, exactly one pipeline is named.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..core.expr import Expr, parse
from ..core.field import Rect, SymMat, Vec2
from ..core.holder import HolderStageConfig, MollifySettings
from ..core.mollify import METHODS as MOLLIFY_METHODS
from ..core.stage_c1 import (
    METHODS as MEASURE_METHODS,
    MODES,
    C1Schedule,
    MeasureSettings,
    SearchSettings,
    StagePlanC1,
)
from ..domain.errors import ConfigurationError
from ..infrastructure.export.mesh_writer import FORMATS
from ..infrastructure.system import config
from ..infrastructure.system.config import PIPELINES


def parse_rect(raw: Any, name: str) -> Rect:
    if isinstance(raw, str):
        return Rect.parse(raw)
    if not isinstance(raw, list) or len(raw) != 4:
        raise ConfigurationError("{0} must be [x0, x1, y0, y1], got {1!r}".format(name, raw))
    return Rect(*(config.exact(x, name) for x in raw))


def _expr(raw: Any, name: str) -> Expr:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raw = str(raw)
    if not isinstance(raw, str):
        raise ConfigurationError("{0} must be an expression string, got {1!r}".format(name, raw))
    return parse(raw)


def _texts(raw: Any, count: int, name: str) -> Tuple[str, ...]:
    if not isinstance(raw, list) or len(raw) != count:
        raise ConfigurationError("{0} needs {1} expressions, got {2!r}".format(name, count, raw))
    return tuple(str(x) for x in raw)


@dataclass(frozen=True)
class RunConfig:
    name: str
    pipeline: str
    domain: Rect
    v0_text: str
    w0_text: Tuple[str, str]
    a_text: Tuple[str, str, str]
    v0: Expr
    w0: Vec2
    A: SymMat
    eps: Fraction
    lambdas: Optional[Tuple[Fraction, ...]]
    subwindow: Optional[Rect]
    sigmas: Tuple[Fraction, ...]
    digits: int
    seed: int
    out_dir: Path
    settings: Dict[str, Any]

    @classmethod
    def from_settings(cls, settings: Dict[str, Any], name: Optional[str] = None) -> "RunConfig":
        """
        Raises
        ------
        ConfigurationError
            Any missing or invalid entry, including expressions that do not parse.
        """
        pipeline = settings.get("pipeline")
        if pipeline not in PIPELINES:
            raise ConfigurationError(
                "pipeline must be one of {0}, got {1!r}".format(", ".join(PIPELINES), pipeline)
            )
        if "domain" not in settings:
            raise ConfigurationError("run config needs a domain")
        domain = parse_rect(settings["domain"], "domain")
        v0_text = str(settings.get("v0", "0"))
        w0_text = _texts(settings.get("w0", ["0", "0"]), 2, "w0")
        if "A" not in settings:
            raise ConfigurationError("run config needs A (three entries a11, a12, a22)")
        a_text = _texts(settings["A"], 3, "A")

        eps = config.get_exact(settings, "eps", "0.1")
        if eps <= 0:
            raise ConfigurationError("eps must be positive, got {0}".format(eps))
        lambdas = config.get_exact_list(settings, "lambdas")
        if lambdas is not None and len(lambdas) != 3:
            raise ConfigurationError("lambdas needs three values, got {0}".format(len(lambdas)))
        sub_raw = settings.get("subwindow")
        subwindow = parse_rect(sub_raw, "subwindow") if sub_raw is not None else None
        if subwindow is not None and not domain.contains(subwindow):
            raise ConfigurationError("subwindow {0} lies outside the domain".format(subwindow.as_list()))
        sigmas = config.get_exact_list(settings, "holder.sigmas") or []
        if any(s <= 1 for s in sigmas):
            raise ConfigurationError("every sigma must be > 1")

        return cls(
            name=str(name or settings.get("name") or pipeline),
            pipeline=pipeline,
            domain=domain,
            v0_text=v0_text,
            w0_text=w0_text,  # type: ignore[arg-type]
            a_text=a_text,  # type: ignore[arg-type]
            v0=_expr(v0_text, "v0"),
            w0=Vec2(*(_expr(t, "w0") for t in w0_text)),
            A=SymMat(*(_expr(t, "A") for t in a_text)),
            eps=eps,
            lambdas=tuple(lambdas) if lambdas is not None else None,
            subwindow=subwindow,
            sigmas=tuple(sigmas),
            digits=config.get_precision_digits(settings),
            seed=config.get_seed(settings),
            out_dir=Path(str(config.lookup(settings, "output.dir", "out"))),
            settings=settings,
        )

    # ---------- per-pipeline settings ----------

    def measure(self) -> MeasureSettings:
        s = self.settings
        return MeasureSettings(
            method=config.get_str(s, "stage.method", "fd", MEASURE_METHODS),
            h=config.get_grid_step(s),
            points_per_period=config.get_int(s, "grid.pointsPerPeriod", 10, minimum=1),
            max_points=config.get_max_grid_points(s),
            subwindow=self.subwindow,
            samples=config.get_sampling_n(s),
            keep=config.get_int(s, "sampling.keep", 1000, minimum=1),
        )

    def c1_plan(self) -> StagePlanC1:
        s = self.settings
        search = SearchSettings(
            start=config.get_exact(s, "search.lambdaStart", "1"),
            factor=config.get_search_factor(s),
            lam_max=config.get_lambda_max(s),
            margin=config.get_exact(s, "search.margin", "0.1"),
            significant=config.get_int(s, "search.significant", 3, minimum=1),
        )
        return StagePlanC1(
            mode=config.get_str(s, "stage.mode", "search", MODES),
            eps=self.eps,
            delta=config.get_exact(s, "stage.delta", "0.5"),
            xi=config.get_exact(s, "stage.xi"),
            lambdas=self.lambdas,
            search=search,
            measure=self.measure(),
        )

    def c1_schedule(self) -> C1Schedule:
        s = self.settings
        return C1Schedule(
            target=config.get_exact(s, "stage.target", "0"),
            stage_budget=config.get_int(s, "stage.stageBudget", 1),
            shift_if_needed=bool(config.lookup(s, "stage.shiftIfNeeded", True)),
        )

    def mollify(self) -> MollifySettings:
        s = self.settings
        return MollifySettings(
            method=config.get_str(s, "mollify.method", "auto", MOLLIFY_METHODS),
            quadrature_n=config.get_quadrature_n(s),
            tol=config.get_quadrature_tol(s),
        )

    def holder_config(self, sigma: Optional[Fraction] = None) -> HolderStageConfig:
        """
        Stage parameters; ``sigma`` falls back to holder.sigma.

        Raises ConfigurationError when neither is set.
        """
        s = self.settings
        sigma = sigma if sigma is not None else self.sigma
        if sigma is None:
            raise ConfigurationError("holder.sigma is not set")
        return HolderStageConfig(
            sigma=sigma,
            M=config.get_exact(s, "holder.M"),
            lam1=self.lam1,
            r=config.get_exact(s, "holder.r", "0.001"),
            delta0=config.get_exact(s, "holder.delta0", "5e-16"),
            beta=self.beta,
            mollify=self.mollify(),
            samples=config.get_sampling_n(s),
            holder_pairs=config.get_int(s, "sampling.holderPairs", 1000, minimum=1),
            keep=config.get_int(s, "sampling.keep", 1000, minimum=1),
        )

    @property
    def sigma(self) -> Optional[Fraction]:
        return config.get_exact(self.settings, "holder.sigma")

    @property
    def lam1(self) -> Optional[Fraction]:
        return config.get_exact(self.settings, "holder.lam1")

    @property
    def alpha(self) -> Fraction:
        return config.get_exact(self.settings, "holder.alpha", "0.1")

    @property
    def beta(self) -> Fraction:
        return config.get_exact(self.settings, "holder.beta", "0.5")

    @property
    def holder_budget(self) -> int:
        return config.get_int(self.settings, "holder.stageBudget", 1)

    @property
    def seeds(self) -> int:
        return config.get_int(self.settings, "holder.seeds", 0)

    # ---------- output ----------

    @property
    def run_dir(self) -> Path:
        return self.out_dir / self.name / self.pipeline

    @property
    def decimals(self) -> int:
        return config.get_output_decimals(self.settings)

    @property
    def mesh_formats(self) -> List[str]:
        raw = config.lookup(self.settings, "output.meshFormats", ["obj", "csv"])
        if not isinstance(raw, list) or any(f not in FORMATS for f in raw):
            raise ConfigurationError(
                "output.meshFormats must be a list drawn from {0}, got {1!r}".format(", ".join(FORMATS), raw)
            )
        return list(raw)

    @property
    def mesh_h(self) -> Fraction:
        return config.get_grid_step(self.settings, "grid.h")

    @property
    def subwindow_h(self) -> Fraction:
        return config.get_grid_step(self.settings, "grid.subwindowH")

    @property
    def max_mesh_points(self) -> int:
        return config.get_max_grid_points(self.settings)

    @property
    def points_per_period(self) -> int:
        return config.get_int(self.settings, "grid.pointsPerPeriod", 10, minimum=1)
