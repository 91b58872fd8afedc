from collections import defaultdict
from typing import Any, Callable, Dict, List, Optional, Type


class EventHub:
    def __init__(self, on_handler_error: Optional[Callable[[Any, Exception], None]] = None):
        self._subs: Dict[Type, List[Callable]] = defaultdict(list)
        self._all: List[Callable] = []
        self._on_handler_error = on_handler_error

    def publish(self, evt: Any) -> None:
        for handler in list(self._subs[type(evt)]) + list(self._all):
            try:
                handler(evt)
            except Exception as exc:
                # listener errors never reach the publishing pipeline
                if self._on_handler_error is not None:
                    try:
                        self._on_handler_error(evt, exc)
                    except Exception:
                        pass

    def subscribe(self, evt_type: Type, handler: Callable):
        self._subs[evt_type].append(handler)
        return lambda: self._subs[evt_type].remove(handler)

    def subscribe_all(self, handler: Callable):
        self._all.append(handler)
        return lambda: self._all.remove(handler)
