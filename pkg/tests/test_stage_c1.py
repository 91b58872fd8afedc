from __future__ import annotations

from fractions import Fraction

import pytest

from corrugator.core.expr import ZERO
from corrugator.core.field import Rect, SymMat, Vec2
from corrugator.core.numeric import make_context
from corrugator.core.stage_c1 import (
    C1Schedule,
    MeasureSettings,
    SearchSettings,
    StagePlanC1,
    default_subwindow,
    iterate_c1,
    norm_points,
    round_sig,
    run_stage_c1,
    search_grid,
)
from corrugator.domain.errors import ConfigurationError, PreconditionError
from corrugator.domain.events import LambdaCandidateRejected, LambdaSelected, StageFinished, StepCompleted
from corrugator.infrastructure.system.event_hub import EventHub

IDENTITY = SymMat(Fraction(1), Fraction(0), Fraction(1))
DOMAIN = Rect("-0.5", "0.5", "-0.5", "0.5")
FLAT = Vec2(ZERO, ZERO)


def _plan(**kw):
    base = dict(
        mode="search",
        eps=Fraction(1, 4),
        delta=Fraction(1, 2),
        measure=MeasureSettings(method="ad", samples=200, keep=50),
    )
    base.update(kw)
    return StagePlanC1(**base)


@pytest.fixture(scope="module")
def fixed_stage():
    ctx = make_context(15, 3)
    return run_stage_c1(ZERO, FLAT, IDENTITY, _plan(lambdas=(1, 40, 1600)), DOMAIN, ctx)


@pytest.mark.parametrize(
    "value, up, expected",
    [
        (1234, False, 1230),
        (1234, True, 1240),
        (Fraction(1, 3), False, Fraction(333, 1000)),
        ("0.0004567", True, Fraction(457, 1000000)),
        (1000, True, 1000),
    ],
)
def test_round_sig(value, up, expected):
    assert round_sig(value, 3, up=up) == expected


def test_round_sig_rejects_non_positive():
    with pytest.raises(ValueError):
        round_sig(0)


def test_search_grid_is_strictly_increasing():
    assert list(search_grid(SearchSettings(start=1, factor=2, lam_max=10))) == [1, 2, 4, 8]
    grid = list(search_grid(SearchSettings(start=1, factor="1.1", lam_max=3, significant=1)))
    assert grid == [1, 2, 3]


@pytest.mark.parametrize(
    "kw",
    [dict(start=0), dict(factor=1), dict(start=10, lam_max=5), dict(margin="-0.1"), dict(significant=0)],
)
def test_search_settings_validate(kw):
    with pytest.raises(ConfigurationError):
        SearchSettings(**kw)


@pytest.mark.parametrize(
    "kw",
    [
        dict(mode="guess"),
        dict(eps=0),
        dict(delta=1),
        dict(delta=0),
        dict(delta=Fraction(1, 4)),
        dict(lambdas=(1, 2)),
        dict(lambdas=(5, 2, 10)),
        dict(xi="-1"),
        dict(amplitudes=("1",)),
    ],
)
def test_stage_plan_validates(kw):
    with pytest.raises(ConfigurationError):
        StagePlanC1(**kw)


def test_measure_settings_validate():
    with pytest.raises(ConfigurationError):
        MeasureSettings(method="exact")
    with pytest.raises(ConfigurationError):
        MeasureSettings(max_points=10)


def test_default_subwindow(unit_square):
    sub = default_subwindow(unit_square)
    assert sub == Rect("0.8", "0.82", "0.8", "0.82")
    assert default_subwindow(DOMAIN) == Rect("0.3", "0.32", "0.3", "0.32")


def test_norm_points_grid_or_samples(dctx, unit_square):
    grid = norm_points(unit_square, MeasureSettings(h="0.1"), dctx)
    assert len(grid) == 121
    capped = norm_points(unit_square, MeasureSettings(h="0.01", max_points=100, samples=37), dctx)
    assert len(capped) == 37


def test_fixed_frequency_stage_passes(fixed_stage):
    v, w, report = fixed_stage
    assert report.passed, report.failed_checks()
    assert report.lambdas == ["1", "40", "1600"]
    assert [s.k for s in report.steps] == [1, 2, 3]
    assert float(report.d_tilde_norm) <= 0.75 * float(report.d_norm)
    assert float(report.d_norm) == pytest.approx(2 ** 0.5)
    assert 0 < float(report.v_change) < 0.25
    assert min(float(m) for m in report.min_phi_out) >= 0.1
    names = {c.name for c in report.checks}
    assert {"defect_ratio", "min_phi_out", "min_phi_dtilde", "v_change", "v_change_apriori", "grad_v_change"} <= names
    assert {b.name for b in report.bounds} == {
        "v_change_sum",
        "w_change_sum",
        "grad_v_change_sum",
        "grad_w_change_sum",
    }


def test_fixed_frequency_steps_record_conditions(fixed_stage):
    _, _, report = fixed_stage
    for step in report.steps:
        names = [c.name for c in step.checks]
        assert "condition_a" in names and "condition_b" in names
        assert len(step.candidates) == 1
        assert step.region == "samples"
        assert all(c.passed for c in step.checks)
        assert all(c.count <= 200 for c in step.checks)


def test_search_stage_picks_increasing_frequencies():
    ctx = make_context(15, 3)
    hub = EventHub()
    seen = []
    hub.subscribe_all(seen.append)
    _, _, report = run_stage_c1(ZERO, FLAT, IDENTITY, _plan(), DOMAIN, ctx, hub=hub)
    assert report.passed, report.failed_checks()
    lams = [Fraction(l) for l in report.lambdas]
    assert lams[0] == 1
    assert lams[0] <= lams[1] <= lams[2]
    assert lams[2] > lams[1] > 1
    assert sum(isinstance(e, LambdaSelected) for e in seen) == 3
    assert sum(isinstance(e, StepCompleted) for e in seen) == 3
    assert any(isinstance(e, LambdaCandidateRejected) for e in seen)
    assert isinstance(seen[-1], StageFinished)
    rejected = [c for s in report.steps for c in s.candidates if not c.accepted]
    assert rejected and all(c.reasons for c in rejected)


def test_zero_amplitudes_give_identity_stage(dctx):
    v, w, report = run_stage_c1(
        ZERO, FLAT, IDENTITY, _plan(amplitudes=("0", "0", "0")), DOMAIN, dctx
    )
    assert report.extra["identity"] == "true"
    assert report.passed
    assert v is ZERO


def test_negative_defect_needs_shift(dctx):
    minus = SymMat(Fraction(-1), Fraction(0), Fraction(-1))
    with pytest.raises(PreconditionError):
        run_stage_c1(ZERO, FLAT, minus, _plan(), DOMAIN, dctx)


def test_iteration_stops_on_budget():
    ctx = make_context(15, 3)
    it = iterate_c1(
        ZERO, FLAT, IDENTITY, Fraction(1, 4), C1Schedule(stage_budget=1), DOMAIN,
        _plan(lambdas=(1, 40, 1600)), ctx,
    )
    assert it.status == "budget_exhausted"
    assert len(it.stages) == 1
    assert it.stages[0][2].passed
    assert not it.shifted


def test_iteration_shifts_negative_defect(dctx):
    minus = SymMat(Fraction(-1), Fraction(0), Fraction(-1))
    it = iterate_c1(ZERO, FLAT, minus, 1, C1Schedule(stage_budget=0), DOMAIN, _plan(), dctx)
    assert it.shifted
    assert it.status == "budget_exhausted"
    assert it.stages == []


def test_iteration_with_zero_defect_reaches_target(dctx):
    zero = SymMat(Fraction(0), Fraction(0), Fraction(0))
    it = iterate_c1(ZERO, FLAT, zero, 1, C1Schedule(stage_budget=1), DOMAIN, _plan(), dctx)
    assert it.status == "target_reached"
    assert it.stages == []


def test_iteration_rejects_non_positive_eps(dctx):
    with pytest.raises(ConfigurationError):
        iterate_c1(ZERO, FLAT, IDENTITY, 0, C1Schedule(), DOMAIN, _plan(), dctx)
    with pytest.raises(ConfigurationError):
        C1Schedule(stage_budget=-1)


def test_search_stage_certifies_coefficient_floor(fixed_stage):
    _, _, report = fixed_stage
    # D = Id: |D| = sqrt(2) everywhere, d = 5/8, xi = 0.9 sqrt(2)
    d_tilde = 0.9 * 2 ** 0.5 * 0.625 / (4 * 2 ** 0.5)
    assert float(report.extra["d"]) == pytest.approx(0.625)
    assert float(report.extra["xi"]) == pytest.approx(0.9 * 2 ** 0.5)
    assert float(report.extra["d_tilde"]) == pytest.approx(d_tilde)
    checks = {c.name: c for c in report.checks}
    floor = checks["min_phi_dtilde"]
    assert float(floor.lhs) == pytest.approx(d_tilde)
    assert float(floor.rhs) == pytest.approx(min(float(m) for m in report.min_phi_out))
    assert floor.passed
    assert float(checks["min_phi_out"].lhs) == pytest.approx(0.1)


def test_search_stage_records_both_ratios(fixed_stage):
    _, _, report = fixed_stage
    d_tilde_norm = float(report.d_tilde_norm)
    assert float(report.extra["ratio_to_d"]) == pytest.approx(d_tilde_norm / 2 ** 0.5)
    assert float(report.extra["ratio_to_xi"]) == pytest.approx(d_tilde_norm / (0.9 * 2 ** 0.5))


def test_search_mode_keeps_half_delta():
    assert StagePlanC1(mode="search").delta == Fraction(1, 2)
    assert StagePlanC1(mode="apriori", delta=Fraction(1, 4)).delta == Fraction(1, 4)
    with pytest.raises(ConfigurationError, match="delta = 0.5"):
        StagePlanC1(mode="search", delta="0.3")
