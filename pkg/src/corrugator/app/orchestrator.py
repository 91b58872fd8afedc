from __future__ import annotations

import datetime as _dt
import time
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

from .. import __version__
from ..core.field import DOUBLE, Rect, Vec2, grid_shape
from ..core.holder import SWEEP_COLUMNS, build_schedule, run_holder, run_stage_holder, sampling_variation, sweep_sigma
from ..core.numeric import PrecisionContext, make_context
from ..core.stage_c1 import default_subwindow, iterate_c1
from ..domain.errors import (
    ArtifactIOError,
    ConfigurationError,
    CorrugatorError,
    ReportSchemaError,
    StageVerificationError,
)
from ..domain.events import (
    ArtifactWritten,
    BoundChecked,
    LambdaCandidateRejected,
    LambdaSelected,
    StageFinished,
    StageStarted,
    StepCompleted,
    StepFields,
    SweepRowFinished,
    emit,
)
from ..domain.reports import RunMetadata, RunReport, StageReport
from ..infrastructure.export.mesh_writer import MeshArtifact, export_mesh
from ..infrastructure.export.report_store import save_report
from ..infrastructure.export.table_writer import write_table
from ..infrastructure.system import config
from ..infrastructure.system.workers import peak_rss_bytes
from .run_config import RunConfig

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_IO = 4

# Run statuses that still count as success.
_OK_STATUSES = ("ok", "target_reached", "budget_exhausted", "eps_exhausted", "zero_defect")

C1_COLUMNS = ("stage", "lambda1", "lambda2", "lambda3", "v_change", "b_ratio_12",
              "min_phi1", "min_phi2", "min_phi3", "d_norm", "d_tilde")
SEED_COLUMNS = ("seed", "d3", "v3", "grad_w3")


def exit_code_for(exc: BaseException) -> int:
    """Exit code of the CLI for an error that ended a run."""
    if isinstance(exc, (ConfigurationError, ReportSchemaError)):
        return EXIT_CONFIG
    if isinstance(exc, ArtifactIOError):
        return EXIT_IO
    if isinstance(exc, CorrugatorError):
        return EXIT_STAGE
    return EXIT_FAILURE


class Orchestrator:
    """
    Runs one pipeline per call and owns its artifacts.

    Responsibilities:
      - Listen to domain events and log them.
      - Collect the (v_k, w_k) of the first stage for mesh export.
      - Map errors to exit codes; write the report and whatever meshes exist
        even when a stage fails.
    """

    def __init__(self, sv):
        self.sv = sv
        self._fields: Dict[Tuple[int, int], Tuple[Any, Vec2]] = {}
        self._lambdas: Dict[Tuple[int, int], Fraction] = {}
        self._artifacts: Dict[str, str] = {}

    # ---------- wiring ----------

    def wire(self) -> List[Callable[[], None]]:
        hub = self.sv.hub
        return [
            hub.subscribe(StageStarted, self.on_stage_started),
            hub.subscribe(LambdaCandidateRejected, self.on_candidate_rejected),
            hub.subscribe(LambdaSelected, self.on_lambda_selected),
            hub.subscribe(StepCompleted, self.on_step_completed),
            hub.subscribe(StepFields, self.on_step_fields),
            hub.subscribe(BoundChecked, self.on_bound_checked),
            hub.subscribe(StageFinished, self.on_stage_finished),
            hub.subscribe(SweepRowFinished, self.on_sweep_row),
            hub.subscribe(ArtifactWritten, self.on_artifact_written),
        ]

    def on_handler_error(self, evt: Any, exc: Exception) -> None:
        try:
            self.sv.log.warn("event_hub", "handler_failed", {"event": type(evt).__name__, "reason": str(exc)})
        except Exception:
            pass

    # ---------- event handlers ----------

    def on_stage_started(self, e: StageStarted) -> None:
        self.sv.log.info("stage_" + e.pipeline, "stage_started", {"index": e.index, "d_norm": e.d_norm})

    def on_candidate_rejected(self, e: LambdaCandidateRejected) -> None:
        self.sv.log.debug(
            "stage_c1",
            "lambda_rejected",
            {"stage": e.stage, "step": e.step, "lambda": e.lam, "reasons": e.reasons, "b_norm": e.b_norm},
        )

    def on_lambda_selected(self, e: LambdaSelected) -> None:
        self.sv.log.info(
            "stage_c1",
            "lambda_selected",
            {"stage": e.stage, "step": e.step, "lambda": e.lam, "region": e.region, "b_norm": e.b_norm},
        )

    def on_step_completed(self, e: StepCompleted) -> None:
        ctx = {"stage": e.stage, "step": e.step, "lambda": e.lam}
        if e.v_change:
            ctx["v_change"] = e.v_change
        self.sv.log.info("stage_" + e.pipeline, "step_completed", ctx)

    def on_step_fields(self, e: StepFields) -> None:
        self._fields[(e.stage, e.step)] = (e.v, e.w)

    def on_bound_checked(self, e: BoundChecked) -> None:
        level = self.sv.log.debug if e.passed else self.sv.log.warn
        level(
            "stage_" + e.pipeline,
            "bound_checked",
            {"stage": e.stage, "step": e.step, "name": e.name, "passed": e.passed, "worst_ratio": e.worst_ratio},
        )

    def on_stage_finished(self, e: StageFinished) -> None:
        level = self.sv.log.info if e.passed else self.sv.log.warn
        level(
            "stage_" + e.pipeline,
            "stage_finished",
            {"index": e.index, "passed": e.passed, "d_norm": e.d_norm, "d_tilde_norm": e.d_tilde_norm},
        )

    def on_sweep_row(self, e: SweepRowFinished) -> None:
        ctx = {"sigma": e.sigma, "d3": e.d3_norm}
        if e.error:
            ctx["error"] = e.error
        self.sv.log.info("sweep", "row_finished", ctx)

    def on_artifact_written(self, e: ArtifactWritten) -> None:
        self.sv.log.info("artifacts", "written", {"kind": e.kind, "path": e.path})

    # ---------- running ----------

    def run(self, rc: RunConfig) -> Tuple[RunReport, int]:
        """
        Execute ``rc`` and write report.json, run.log, tables and meshes under
        ``rc.run_dir``. Returns the report and the exit code.
        """
        self._fields.clear()
        self._lambdas.clear()
        self._artifacts = {}
        started = time.perf_counter()
        report = RunReport(
            pipeline=rc.pipeline,
            name=rc.name,
            metadata=RunMetadata(
                version=__version__,
                settings_digest=config.settings_digest(rc.settings),
                seed=rc.seed,
                digits=rc.digits,
                started=_dt.datetime.now(_dt.timezone.utc).replace(tzinfo=None).isoformat() + "Z",
            ),
        )
        try:
            self.sv.log.attach_file(rc.run_dir / "run.log")
        except OSError as exc:
            report.status = "io_error"
            report.error = "cannot open run log: {0}".format(exc)
            self.sv.log.error("run", "io_error", {"reason": report.error})
            return report, EXIT_IO

        self.sv.log.info("run", "started", {"name": rc.name, "pipeline": rc.pipeline, "digits": rc.digits})
        code = EXIT_OK
        final: Optional[Tuple[Any, Vec2]] = None
        ctx: Optional[PrecisionContext] = None
        try:
            ctx = make_context(rc.digits, rc.seed)
            runner = {"c1": self._run_c1, "holder": self._run_holder, "sweep": self._run_sweep}[rc.pipeline]
            final = runner(rc, ctx, report)
            if report.status not in _OK_STATUSES:
                code = EXIT_STAGE
        except StageVerificationError as exc:
            report.status = "stage_failed"
            report.error = str(exc)
            if isinstance(exc.report, StageReport):
                report.stages.append(exc.report)
            code = EXIT_STAGE
        except CorrugatorError as exc:
            report.status = "config_error" if exit_code_for(exc) == EXIT_CONFIG else "error"
            report.error = str(exc)
            code = exit_code_for(exc)
            ctx_log = {"reason": str(exc), "type": type(exc).__name__}
            point = getattr(exc, "point", None)
            if point is not None:
                ctx_log["point"] = [str(p) for p in point]
            self.sv.log.error("run", "failed", ctx_log)

        if ctx is not None and rc.pipeline != "sweep":
            try:
                self._write_meshes(rc, ctx, final)
            except CorrugatorError as exc:
                self.sv.log.error("artifacts", "mesh_failed", {"reason": str(exc)})
                code = code or exit_code_for(exc)

        report.metadata.wall_seconds = round(time.perf_counter() - started, 3)
        report.metadata.peak_rss_bytes = peak_rss_bytes()
        report.artifacts = dict(self._artifacts)
        path = rc.run_dir / "report.json"
        report.artifacts["report"] = str(path)
        try:
            save_report(report, path)
            emit(self.sv.hub, ArtifactWritten("report", str(path)))
        except ArtifactIOError as exc:
            self.sv.log.error("artifacts", "report_failed", {"reason": str(exc)})
            code = code or EXIT_IO
        self.sv.log.info(
            "run",
            "finished",
            {"status": report.status, "exit_code": code, "wall_seconds": report.metadata.wall_seconds},
        )
        self.sv.log.close()
        return report, code

    # ---------- pipelines ----------

    def _run_c1(self, rc: RunConfig, ctx: PrecisionContext, report: RunReport) -> Tuple[Any, Vec2]:
        it = iterate_c1(rc.v0, rc.w0, rc.A, rc.eps, rc.c1_schedule(), rc.domain, rc.c1_plan(), ctx, self.sv.hub)
        report.status = it.status
        report.stages.extend(r for _, _, r in it.stages)
        if it.shifted:
            report.trace.append({"event": "initial_shift", "shifted": "true"})
        rows = []
        for stage in report.stages:
            for step in stage.steps:
                self._lambdas[(stage.index, step.k)] = Fraction(step.lam)
            min_phi = stage.steps[1].min_phi if len(stage.steps) > 1 else stage.min_phi_out
            lams = stage.lambdas + [""] * (3 - len(stage.lambdas))
            rows.append(
                [str(stage.index)] + lams
                + [stage.v_change, stage.extra.get("b_ratio_12", "")]
                + list(min_phi) + [""] * (3 - len(min_phi))
                + [stage.d_norm, stage.d_tilde_norm]
            )
        self._table(rc, "stages", C1_COLUMNS, rows)
        return it.v, it.w

    def _run_holder(self, rc: RunConfig, ctx: PrecisionContext, report: RunReport) -> Tuple[Any, Vec2]:
        if rc.lam1 is not None or config.lookup(rc.settings, "holder.M") is not None:
            cfg = rc.holder_config()
            v, w, stage = run_stage_holder(rc.v0, rc.w0, rc.A, cfg, rc.domain, ctx, hub=self.sv.hub, strict=False)
            report.stages.append(stage)
            report.status = "ok" if stage.passed else "stage_failed"
        else:
            schedule = build_schedule(
                rc.alpha,
                rc.beta,
                rc.v0,
                rc.w0,
                rc.A,
                rc.domain,
                ctx,
                r=config.get_exact(rc.settings, "holder.r", "0.001"),
                delta0=config.get_exact(rc.settings, "holder.delta0", "5e-16"),
                sigma=rc.sigma,
                samples=config.get_sampling_n(rc.settings),
                pairs=config.get_int(rc.settings, "sampling.holderPairs", 1000, minimum=1),
            )
            report.trace.append(
                {
                    "s": str(schedule.s),
                    "C": str(schedule.C),
                    "sigma_min": str(schedule.sigma_min),
                    "sigma_max": str(schedule.sigma_max),
                    "M0": str(schedule.M0),
                    "N": str(schedule.N),
                    "admissible": str(schedule.admissible).lower(),
                }
            )
            cfg = rc.holder_config(sigma=rc.sigma or Fraction(2))
            run = run_holder(rc.v0, rc.w0, rc.A, schedule, rc.holder_budget, rc.domain, ctx, cfg, self.sv.hub)
            report.stages.extend(run.stages)
            report.trace.extend(run.trace)
            report.status = run.status
            v, w = run.v, run.w
        for stage in report.stages:
            for step in stage.steps:
                self._lambdas[(stage.index, step.k)] = Fraction(step.lam)
        if rc.seeds > 0 and report.stages:
            rows = sampling_variation(
                v, w, rc.A, rc.domain, ctx, rc.seeds, config.get_sampling_n(rc.settings)
            )
            self._table(rc, "seeds", SEED_COLUMNS, [[r[c] for c in SEED_COLUMNS] for r in rows])
        return v, w

    def _run_sweep(self, rc: RunConfig, ctx: PrecisionContext, report: RunReport) -> None:
        if not rc.sigmas:
            self._table(rc, "sweep", SWEEP_COLUMNS + ("error",), [])
            report.status = "ok"
            return None
        cfg = rc.holder_config(sigma=rc.sigmas[0])
        rows = sweep_sigma(rc.v0, rc.w0, rc.A, cfg, rc.sigmas, rc.domain, ctx, self.sv.hub)
        report.stages.extend(row.report for row in rows if row.report is not None)
        for row in rows:
            report.trace.append({"sigma": row.cells()[0], "error": row.error})
        self._table(rc, "sweep", SWEEP_COLUMNS + ("error",), [row.cells() + [row.error] for row in rows])
        report.status = "ok"
        return None

    # ---------- artifacts ----------

    def _table(self, rc: RunConfig, name: str, header: Tuple[str, ...], rows: List[List[str]]) -> None:
        path = write_table(rc.run_dir / "tables" / (name + ".csv"), header, rows)
        self._artifacts["table_" + name] = str(path)
        emit(self.sv.hub, ArtifactWritten("table", str(path)))

    def _mesh(self, rc: RunConfig, label: str, f: Any, rect: Rect, h: Any, ctx: PrecisionContext, lam: Any) -> None:
        rows, cols = grid_shape(rect, h)
        if rows * cols > rc.max_mesh_points:
            self.sv.log.warn(
                "artifacts",
                "mesh_skipped",
                {"label": label, "nodes": rows * cols, "limit": rc.max_mesh_points},
            )
            return
        for fmt in rc.mesh_formats:
            path = rc.run_dir / "meshes" / "{0}.{1}".format(label, fmt)
            art: MeshArtifact = export_mesh(
                f, rect, h, fmt, path, ctx, rc.decimals, finest_lambda=lam, points_per_period=rc.points_per_period
            )
            if art.warning:
                self.sv.log.warn("artifacts", "mesh_resolution", {"path": str(path), "reason": art.warning})
            self._artifacts["mesh_{0}_{1}".format(label, fmt)] = str(path)
            emit(self.sv.hub, ArtifactWritten("mesh", str(path)))

    def _write_meshes(self, rc: RunConfig, ctx: PrecisionContext, final: Optional[Tuple[Any, Vec2]]) -> None:
        """
        v₀ on the full domain; for C¹ runs also v₁, v₂ of the first stage;
        the final v on the subwindow. Missing steps are skipped.
        """
        if not config.lookup(rc.settings, "output.meshes", True):
            return
        window = rc.subwindow or default_subwindow(rc.domain)
        self._mesh(rc, "v0", rc.v0, rc.domain, rc.mesh_h, DOUBLE, None)
        if rc.pipeline == "c1":
            for k in (1, 2):
                if (1, k) in self._fields:
                    self._mesh(rc, "v{0}".format(k), self._fields[(1, k)][0], rc.domain, rc.mesh_h, DOUBLE,
                               self._lambdas.get((1, k)))
        if final is not None:
            lams = list(self._lambdas.values())
            label = "v{0}".format(len(lams)) if lams else "v_final"
            self._mesh(rc, label, final[0], window, rc.subwindow_h, ctx, max(lams) if lams else None)
        elif self._fields:
            last = max(self._fields)
            self._mesh(rc, "v_partial", self._fields[last][0], window, rc.subwindow_h, ctx, self._lambdas.get(last))
