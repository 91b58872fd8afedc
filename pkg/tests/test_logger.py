from __future__ import annotations

import io
import json

from corrugator.infrastructure.system.logger import Logger


def _lines(stream):
    return [json.loads(line) for line in stream.getvalue().splitlines()]


def test_json_lines_layout():
    out = io.StringIO()
    log = Logger("INFO", stream=out)
    log.info("stage.start", "stage 1 started", {"d_norm": "1.41"})
    (line,) = _lines(out)
    assert set(line) == {"ts", "level", "event", "msg", "ctx"}
    assert line["level"] == "INFO"
    assert line["event"] == "stage.start"
    assert line["ctx"] == {"d_norm": "1.41"}
    assert line["ts"].endswith("Z")


def test_threshold_drops_lower_levels():
    out = io.StringIO()
    log = Logger("warn", stream=out)
    log.debug("a", "a")
    log.info("b", "b")
    log.warn("c", "c")
    log.error("d", "d", {"n": 1})
    assert [line["event"] for line in _lines(out)] == ["c", "d"]


def test_unknown_level_means_info():
    out = io.StringIO()
    log = Logger("chatty", stream=out)
    log.debug("a", "a")
    log.info("b", "b")
    assert [line["event"] for line in _lines(out)] == ["b"]


def test_attach_file_appends(tmp_path):
    out = io.StringIO()
    path = tmp_path / "logs" / "run.log"
    log = Logger("INFO", stream=out)
    log.attach_file(path)
    log.info("one", "first", {"lam": object()})
    log.close()
    log.info("two", "second")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["event"] == "one"
    assert len(_lines(out)) == 2
