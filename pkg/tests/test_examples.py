from __future__ import annotations

from fractions import Fraction

import pytest

from corrugator.app.examples import EXAMPLES, example_names, get_example
from corrugator.app.main import main
from corrugator.app.run_config import RunConfig
from corrugator.core.holder import HolderStageConfig, run_stage_holder
from corrugator.core.numeric import make_context
from corrugator.domain.errors import ConfigurationError
from corrugator.infrastructure.export.report_store import load_report
from corrugator.infrastructure.system import config


def test_example_names():
    assert example_names() == ["ex3.1", "ex3.2", "ex6.1", "ex6.2", "ex6.3"]
    with pytest.raises(ConfigurationError, match="ex3.1"):
        get_example("ex4")


def test_run_config_is_a_copy():
    cfg = get_example("ex3.1").run_config()
    cfg["stage"]["mode"] = "fixed"
    assert EXAMPLES["ex3.1"].config["stage"]["mode"] == "search"


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_examples_validate(name):
    settings = config.merge(config.load_settings(), get_example(name).run_config())
    rc = RunConfig.from_settings(settings)
    assert rc.name == name
    if rc.pipeline == "holder":
        assert rc.digits == 50
        assert rc.subwindow is not None and rc.domain.contains(rc.subwindow)
        assert rc.holder_config().lam1 == 10 ** 19
    else:
        assert rc.c1_plan().mode == "search"


@pytest.mark.slow
def test_first_c1_example(tmp_path):
    args = ["c1", "ex3.1", "--out-dir", str(tmp_path)]
    cfg = tmp_path / "quiet.json"
    cfg.write_text('{"output": {"meshes": false}}', encoding="utf-8")
    assert main(args + ["--config", str(cfg)]) == 0
    report = load_report(tmp_path / "ex3.1" / "c1" / "report.json")
    stage = report.stages[0]
    assert stage.passed, stage.failed_checks()
    lams = [Fraction(l) for l in stage.lambdas]
    assert lams[0] < lams[1] < lams[2]
    assert float(stage.v_change) < 0.1
    assert float(stage.d_tilde_norm) < float(stage.d_norm)


@pytest.mark.slow
def test_small_defect_holder_stage():
    settings = config.merge(config.load_settings(), get_example("ex6.1").run_config())
    rc = RunConfig.from_settings(settings)
    cfg = HolderStageConfig(sigma=35, lam1=10 ** 19, samples=100, holder_pairs=100, keep=50)
    ctx = make_context(50, rc.seed)
    _, _, report = run_stage_holder(rc.v0, rc.w0, rc.A, cfg, rc.subwindow, ctx, strict=False)
    assert [Fraction(l) for l in report.lambdas] == [10 ** 19, 35 * 10 ** 19, 1225 * 10 ** 19]
    assert float(report.d_norm) == pytest.approx(2 * 2 ** 0.5 * 1e-18, rel=1e-2)
    assert {"d3", "grad_v3", "grad_w3", "hess_v3", "hess_w3"} <= set(report.norms)
