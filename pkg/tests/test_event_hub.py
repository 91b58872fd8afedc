from __future__ import annotations

from corrugator.domain.events import StageStarted, StepCompleted, emit
from corrugator.infrastructure.system.event_hub import EventHub


def test_typed_and_catch_all_subscribers():
    hub = EventHub()
    typed, every = [], []
    unsubscribe = hub.subscribe(StageStarted, typed.append)
    hub.subscribe_all(every.append)
    hub.publish(StageStarted("c1", 1, "1.4"))
    hub.publish(StepCompleted("c1", 1, 1, "40"))
    assert len(typed) == 1 and len(every) == 2
    unsubscribe()
    hub.publish(StageStarted("c1", 2, "0.7"))
    assert len(typed) == 1 and len(every) == 3


def test_failing_handler_does_not_stop_others():
    failures = []
    hub = EventHub(on_handler_error=lambda evt, exc: failures.append((type(evt).__name__, str(exc))))

    def boom(evt):
        raise RuntimeError("listener broke")

    seen = []
    hub.subscribe(StageStarted, boom)
    hub.subscribe(StageStarted, seen.append)
    hub.publish(StageStarted("holder", 1, "1e-18"))
    assert len(seen) == 1
    assert failures == [("StageStarted", "listener broke")]


def test_emit_without_hub_is_a_no_op():
    emit(None, StageStarted("c1", 1, "1"))
