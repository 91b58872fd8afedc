from __future__ import annotations

from fractions import Fraction

import pytest

from corrugator.core.corrugation import StepParams
from corrugator.core.expr import ZERO, X, Y
from corrugator.core.field import Rect, SymMat, Vec2
from corrugator.core.holder import (
    DEFAULT_DELTA0,
    DELTA0_CAP,
    SWEEP_COLUMNS,
    HolderStageConfig,
    MollifySettings,
    build_schedule,
    check_frequency_precision,
    one_step_mod_check,
    run_holder,
    run_stage_holder,
    sampling_variation,
    stage_scales,
    sweep_sigma,
)
from corrugator.core.numeric import make_context, sample_points
from corrugator.domain.errors import ConfigurationError, PreconditionError

FLAT = Vec2(ZERO, ZERO)
IDENTITY = SymMat(Fraction(1), Fraction(0), Fraction(1))
NOTHING = SymMat(Fraction(0), Fraction(0), Fraction(0))


def _cfg(**kw):
    base = dict(sigma=35, samples=50, holder_pairs=50)
    base.update(kw)
    return HolderStageConfig(**base)


@pytest.mark.parametrize("kw", [dict(method="fft"), dict(quadrature_n=4), dict(tol=0), dict(tol=1)])
def test_mollify_settings_validate(kw):
    with pytest.raises(ConfigurationError):
        MollifySettings(**kw)


@pytest.mark.parametrize(
    "kw",
    [
        dict(sigma=1),
        dict(M=4, lam1=10),
        dict(M=-1),
        dict(r=1),
        dict(delta0="1e-15"),
        dict(delta0=0),
        dict(beta=1),
        dict(samples=0),
    ],
)
def test_stage_config_validates(kw):
    with pytest.raises(ConfigurationError):
        _cfg(**kw)


def test_stage_config_accepts_the_cap():
    assert _cfg(delta0=DELTA0_CAP).delta0 == DELTA0_CAP
    assert DEFAULT_DELTA0 < DELTA0_CAP


def test_stage_scales_with_fixed_first_frequency(dctx):
    cfg = _cfg(lam1=10 ** 19)
    scales = stage_scales(cfg, 1.414e-18, 0.0, 0.0, dctx)
    assert scales.lams == (10 ** 19, 35 * 10 ** 19, 1225 * 10 ** 19)
    assert scales.l == Fraction(35, 10 ** 19)
    for k in range(3):
        assert scales.ls[k] * scales.lams[k] == 35
    assert scales.M > 1


def test_stage_scales_from_power_of_two(dctx):
    scales = stage_scales(_cfg(), 1.414e-18, 0.0, 0.0, dctx)
    assert float(scales.M) == pytest.approx(2, rel=2e-5)
    lam1 = scales.lams[0]
    digits = str(lam1.numerator).rstrip("0")
    assert lam1.denominator == 1 and len(digits) <= 6


def test_stage_scales_need_small_l(dctx):
    with pytest.raises(PreconditionError):
        stage_scales(_cfg(lam1=10), 1.414e-18, 0.0, 0.0, dctx)


def test_frequency_precision_guard(unit_square):
    lam = Fraction(1225 * 10 ** 19)
    with pytest.raises(PreconditionError):
        check_frequency_precision(lam, unit_square, make_context(30, 0))
    check_frequency_precision(lam, unit_square, make_context(50, 0))


def test_stage_refuses_large_or_zero_defect(dctx, unit_square):
    with pytest.raises(PreconditionError):
        run_stage_holder(ZERO, FLAT, IDENTITY, _cfg(), unit_square, dctx)
    with pytest.raises(PreconditionError):
        run_stage_holder(ZERO, FLAT, NOTHING, _cfg(), unit_square, dctx)


def test_sweep_rows_carry_errors(dctx, unit_square):
    rows = sweep_sigma(ZERO, FLAT, IDENTITY, _cfg(), [10, "100"], unit_square, dctx)
    assert [r.sigma for r in rows] == [10, 100]
    for row in rows:
        assert row.report is None
        assert "delta0" in row.error
        assert row.cells()[1:] == ["error"] * (len(SWEEP_COLUMNS) - 1)
    assert rows[0].cells()[0] == "10"


def test_modified_step_estimates(dctx, unit_square):
    pts = sample_points(unit_square, 100, dctx)
    p = StepParams(Fraction(1, 10), 2, 10)
    step = one_step_mod_check(ZERO, FLAT, p, Fraction(1, 10), Fraction(1, 10), pts, dctx)
    assert [c.name for c in step.conditions] == [
        "scale_a0", "scale_a1", "scale_a2", "scale_a3", "scale_v2", "scale_v3",
    ]
    assert [b.name for b in step.bounds] == [
        "defect_error", "v_shift", "grad_v", "hess_v", "third_v", "w_shift", "grad_w", "hess_w",
    ]
    assert step.passed, [c.name for c in step.checks if not c.passed]


def test_modified_step_extended_precision(mctx, unit_square):
    pts = sample_points(unit_square, 10, mctx)
    p = StepParams(Fraction(1, 10), 3, 20)
    step = one_step_mod_check(ZERO, FLAT, p, Fraction(1, 10), Fraction(1, 10), pts, mctx)
    assert step.passed


def test_modified_step_needs_frequency_above_inverse_scale(dctx, unit_square):
    pts = sample_points(unit_square, 5, dctx)
    with pytest.raises(PreconditionError):
        one_step_mod_check(ZERO, FLAT, StepParams(1, 1, 5), 1, Fraction(1, 10), pts, dctx)


def test_zero_amplitude_modified_step(dctx, unit_square):
    pts = sample_points(unit_square, 5, dctx)
    step = one_step_mod_check(ZERO, FLAT, StepParams(ZERO, 1, 10), 1, Fraction(1, 10), pts, dctx)
    assert step.passed and step.v is ZERO


def test_schedule_for_zero_data(dctx, unit_square):
    sched = build_schedule("0.1", "0.5", ZERO, FLAT, NOTHING, unit_square, dctx, samples=50, pairs=50)
    assert sched.s == Fraction(5, 6)
    assert float(sched.C) == pytest.approx(2.09e9)
    assert sched.admissible
    assert sched.N == 2 ** 27
    assert sched.M(1) > sched.M(0)
    assert sched.inset(0) == Fraction(1, 1000)
    assert sched.inset(1) == Fraction(1, 1000) - DEFAULT_DELTA0 / 2
    assert sched.sigma(0) == sched.sigma(5)


def test_schedule_with_small_target(dctx, unit_square):
    A = SymMat(Fraction(1, 10 ** 18), Fraction(0), Fraction(1, 10 ** 18))
    sched = build_schedule("0.1", "0.5", ZERO, FLAT, A, unit_square, dctx, samples=50, pairs=50)
    assert sched.N >= 1
    assert float(sched.d0_norm) == pytest.approx(2 ** 0.5 * 1e-18)
    assert sched.decay_bound(1) < sched.decay_bound(0)


def test_schedule_override_is_not_admissible(dctx, unit_square):
    sched = build_schedule("0.1", "0.5", ZERO, FLAT, NOTHING, unit_square, dctx, sigma=35, samples=20, pairs=20)
    assert not sched.admissible
    assert sched.sigma(0) == 35


@pytest.mark.parametrize(
    "alpha, beta, kw",
    [
        (Fraction(1, 7), Fraction(2, 7), {}),
        ("0.1", "1", {}),
        ("0.3", "0.9", {}),
        ("0.1", "0.5", dict(delta0=DELTA0_CAP)),
    ],
)
def test_schedule_rejects(dctx, unit_square, alpha, beta, kw):
    with pytest.raises(ConfigurationError):
        build_schedule(alpha, beta, ZERO, FLAT, NOTHING, unit_square, dctx, samples=20, pairs=20, **kw)


def test_run_holder_stops_on_zero_defect(dctx, unit_square):
    sched = build_schedule("0.1", "0.5", ZERO, FLAT, NOTHING, unit_square, dctx, samples=20, pairs=20)
    run = run_holder(ZERO, FLAT, NOTHING, sched, 3, unit_square, dctx, _cfg())
    assert run.status == "zero_defect"
    assert run.stages == [] and run.trace == []


def test_sampling_variation(dctx, unit_square):
    rows = sampling_variation(ZERO, FLAT, IDENTITY, unit_square, dctx, seeds=2, samples=20)
    assert [r["seed"] for r in rows] == ["0", "1"]
    for r in rows:
        assert float(r["d3"]) == pytest.approx(2 ** 0.5)
        assert float(r["v3"]) == 0.0


@pytest.fixture(scope="module")
def small_defect_stage():
    # |D| ~ 2.8e-16 sits between the numeric floor of 25 digits and delta0
    ctx = make_context(25, 1)
    bump = Fraction(1, 10 ** 16) * (X * X + Y * Y)
    A = SymMat(bump, ZERO, bump)
    return run_stage_holder(ZERO, FLAT, A, _cfg(samples=20, holder_pairs=20, keep=20), Rect(-1, 1, -1, 1), ctx)


def test_small_defect_stage_passes(small_defect_stage):
    _, _, report = small_defect_stage
    assert report.passed, report.failed_checks()
    assert 1e-17 < float(report.d_norm) < float(DELTA0_CAP)
    assert float(report.d_tilde_norm) < float(report.d_norm)
    lams = [Fraction(l) for l in report.lambdas]
    assert lams[1] == 35 * lams[0] and lams[2] == 1225 * lams[0]
    assert float(report.extra["M"]) == pytest.approx(2, rel=1e-4)
    assert {c.name for c in report.checks} == {
        "defect_stage", "v_change", "w_change", "grad_v_change", "grad_w_change", "hess_v3", "hess_w3",
    }


def test_small_defect_stage_amplitude_floor(small_defect_stage):
    _, _, report = small_defect_stage
    floors = [b for b in report.bounds if b.name.startswith("amplitude_floor_")]
    assert [b.name for b in floors] == ["amplitude_floor_1", "amplitude_floor_2", "amplitude_floor_3"]
    assert all(b.passed for b in floors)


def test_small_defect_stage_scale_chain(small_defect_stage):
    _, _, report = small_defect_stage
    deltas = [float(d) for d in report.extra["deltas"].split()]
    assert deltas[1] == pytest.approx(124 * deltas[0])
    assert deltas[2] == pytest.approx(124 ** 2 * deltas[0])
    assert [float(s.extra["delta"]) for s in report.steps] == pytest.approx(deltas)
    for step in report.steps:
        names = [c.name for c in step.checks]
        assert names[:6] == ["scale_a0", "scale_a1", "scale_a2", "scale_a3", "scale_v2", "scale_v3"]
        assert "defect_error" in names and "third_v" in names
        assert all(c.passed for c in step.checks)
