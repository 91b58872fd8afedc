import datetime as _dt
import json
import sys
import threading
from pathlib import Path
from typing import IO, Any, Dict, Optional

_LEVELS = {"DEBUG": 10, "INFO": 20, "WARN": 30, "ERROR": 40}


class Logger:
    """
    One JSON object per line: {"ts", "level", "event", "msg", "ctx"}.

    Lines go to stderr (stdout carries CLI tables) and, once ``attach_file``
    has been called, to that file as well.
    """

    def __init__(self, level: str = "INFO", stream: Optional[IO[str]] = None) -> None:
        self._threshold = _LEVELS.get(level.upper(), 20)
        self._stream = stream
        self._file: Optional[IO[str]] = None
        self._lock = threading.Lock()

    def attach_file(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.close()
        self._file = path.open("a", encoding="utf-8")

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    def _emit(self, level: str, event: str, message: str, ctx: Optional[Dict[str, Any]]) -> None:
        if _LEVELS[level] < self._threshold:
            return
        ts = _dt.datetime.now(_dt.timezone.utc).replace(tzinfo=None).isoformat() + "Z"
        line = {"ts": ts, "level": level, "event": event, "msg": message, "ctx": ctx or {}}
        text = json.dumps(line, default=str)
        with self._lock:
            print(text, file=self._stream or sys.stderr)
            if self._file is not None:
                self._file.write(text + "\n")
                self._file.flush()

    def info(self, event, message, ctx=None):
        self._emit("INFO", event, message, ctx)

    def debug(self, event, message, ctx=None):
        self._emit("DEBUG", event, message, ctx)

    def warn(self, event, message, ctx=None):
        self._emit("WARN", event, message, ctx)

    def error(self, event, message, ctx=None):
        self._emit("ERROR", event, message, ctx)
