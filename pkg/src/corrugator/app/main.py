# src/corrugator/app/main.py
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

# ---- infrastructure ----
from ..infrastructure.export.mesh_writer import FORMATS, export_mesh
from ..infrastructure.export.report_store import load_report
from ..infrastructure.export.table_writer import aligned, read_table
from ..infrastructure.system import config
from ..infrastructure.system.event_hub import EventHub
from ..infrastructure.system.logger import Logger

# ---- core / domain ----
from ..core.expr import parse
from ..core.field import Rect
from ..core.numeric import make_context
from ..core.verify import all_passed, recheck_report
from ..domain.errors import CorrugatorError
from .. import __version__

from .examples import example_names, get_example
from .orchestrator import EXIT_OK, EXIT_STAGE, Orchestrator, exit_code_for
from .run_config import RunConfig, parse_rect

RUN_COMMANDS = ("c1", "holder", "sweep")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrugator", description="Convex integration experiments.")
    p.add_argument("--version", action="version", version="corrugator " + __version__)
    sub = p.add_subparsers(dest="command", required=True)

    for name in RUN_COMMANDS:
        r = sub.add_parser(name, help="run the {0} pipeline".format(name))
        r.add_argument("example", nargs="?", help="built-in example: " + ", ".join(example_names()))
        _common(r)
        r.add_argument("--sigma", help="sigma (holder) or comma-separated sigma list (sweep)")
        r.add_argument("--subwindow", help="x0,x1,y0,y1 for late corrugations and the fine mesh")
        r.add_argument("--seeds", type=int, help="re-measure the final fields with N sample seeds (holder)")

    v = sub.add_parser("verify", help="recompute every recorded check of a report")
    v.add_argument("report", type=Path)

    e = sub.add_parser("export", help="write a heightfield mesh of an expression")
    e.add_argument("example", nargs="?", help="take v0 and the domain from this example")
    _common(e)
    e.add_argument("--expr", help="expression text (defaults to the config's v0)")
    e.add_argument("--rect", help="x0,x1,y0,y1 (defaults to the config's domain)")
    e.add_argument("--h", help="grid step (defaults to grid.h)")
    e.add_argument("--format", choices=FORMATS, default="obj")
    e.add_argument("--out", type=Path, required=True, help="output file")
    e.add_argument("--lambda", dest="lam", help="finest corrugation frequency, for the resolution warning")
    return p


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="run config (.json, .yaml, .yml)")
    p.add_argument("--out-dir", type=Path, help="artifact root (output.dir)")
    p.add_argument("--precision-digits", type=int, help="precision.digits")
    p.add_argument("--seed", type=int, help="precision.seed")


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    if getattr(args, "out_dir", None) is not None:
        out.setdefault("output", {})["dir"] = str(args.out_dir)
    if getattr(args, "precision_digits", None) is not None:
        out.setdefault("precision", {})["digits"] = args.precision_digits
    if getattr(args, "seed", None) is not None:
        out.setdefault("precision", {})["seed"] = args.seed
    if getattr(args, "subwindow", None):
        out["subwindow"] = args.subwindow
    if getattr(args, "seeds", None) is not None:
        out.setdefault("holder", {})["seeds"] = args.seeds
    sigma = getattr(args, "sigma", None)
    if sigma:
        values = [s.strip() for s in sigma.split(",") if s.strip()]
        if args.command == "sweep":
            out.setdefault("holder", {})["sigmas"] = values
        else:
            out.setdefault("holder", {})["sigma"] = values[0] if len(values) == 1 else values
    return out


def build_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Packaged defaults, then the example, then --config, then flags."""
    settings = config.load_settings()
    if getattr(args, "example", None):
        settings = config.merge(settings, get_example(args.example).run_config())
    if getattr(args, "config", None) is not None:
        settings = config.load_run_config(args.config, settings)
    settings = config.merge(settings, _overrides(args))
    if args.command in RUN_COMMANDS:
        settings["pipeline"] = args.command
    return settings


def _run(args: argparse.Namespace) -> int:
    settings = build_settings(args)
    log = Logger(level=config.get_log_level(settings))

    # ---- tiny service bag for Orchestrator ----
    class _Sv(object):
        pass

    sv = _Sv()
    sv.log = log
    orch = Orchestrator(sv)
    sv.hub = EventHub(on_handler_error=orch.on_handler_error)
    orch.wire()

    rc = RunConfig.from_settings(settings)
    report, code = orch.run(rc)
    print("{0} {1}: {2}".format(rc.pipeline, rc.name, report.status))
    for key in sorted(report.artifacts):
        if key.startswith("table_"):
            rows = read_table(Path(report.artifacts[key]))
            if rows:
                print(aligned(rows[0], rows[1:]))
    print("report: {0}".format(report.artifacts.get("report", "")))
    if report.error:
        print("error: {0}".format(report.error), file=sys.stderr)
    return code


def _verify(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    rows = recheck_report(report)
    for name, recorded, recomputed in rows:
        mark = "ok" if recorded and recomputed else "FAIL"
        print("{0:4}  {1}  recorded={2} recomputed={3}".format(mark, name, recorded, recomputed))
    ok = all_passed(rows)
    print("{0} checks, {1}".format(len(rows), "all pass" if ok else "failures"))
    return EXIT_OK if ok else EXIT_STAGE


def _export(args: argparse.Namespace) -> int:
    settings = build_settings(args)
    text = args.expr if args.expr is not None else settings.get("v0")
    if text is None:
        print("export needs --expr or a config with v0", file=sys.stderr)
        return 2
    f = parse(str(text))
    if args.rect:
        rect = Rect.parse(args.rect)
    elif "domain" in settings:
        rect = parse_rect(settings["domain"], "domain")
    else:
        print("export needs --rect or a config with a domain", file=sys.stderr)
        return 2
    h = config.exact(args.h, "--h") if args.h else config.get_grid_step(settings)
    ctx = make_context(config.get_precision_digits(settings), config.get_seed(settings))
    lam = config.exact(args.lam, "--lambda") if args.lam else None
    art = export_mesh(
        f, rect, h, args.format, args.out, ctx, config.get_output_decimals(settings), finest_lambda=lam,
        points_per_period=config.get_int(settings, "grid.pointsPerPeriod", 10, minimum=1),
    )
    if art.warning:
        print("warning: " + art.warning, file=sys.stderr)
    print("{0}: {1} vertices".format(art.path, art.vertices))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(list(argv) if argv is not None else None)
    try:
        if args.command in RUN_COMMANDS:
            return _run(args)
        if args.command == "verify":
            return _verify(args)
        return _export(args)
    except CorrugatorError as exc:
        print("error: {0}".format(exc), file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
