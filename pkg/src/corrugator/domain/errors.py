from __future__ import annotations

from typing import Any, Optional, Sequence


class CorrugatorError(RuntimeError):
    """Base class for every error raised by corrugator."""


class ConfigurationError(CorrugatorError):
    pass


class ExprSyntaxError(ConfigurationError):
    def __init__(self, text: str, offset: int, detail: str = "") -> None:
        self.text = text
        self.offset = offset
        self.detail = detail
        super().__init__(
            "syntax error at offset {0} in {1!r}{2}".format(
                offset, text, ": " + detail if detail else ""
            )
        )


class UnknownIdentifierError(ConfigurationError):
    def __init__(self, name: str, offset: int) -> None:
        self.name = name
        self.offset = offset
        super().__init__(
            "unknown identifier {0!r} at offset {1}".format(name, offset)
        )


class DomainError(CorrugatorError):
    pass


class GridTooSmallError(CorrugatorError):
    pass


class ShapeError(CorrugatorError):
    pass


class SingularityError(CorrugatorError):
    """sqrt argument fell below its declared floor."""

    def __init__(self, message: str, point: Optional[Sequence[Any]] = None) -> None:
        self.message = message
        self.point = point
        super().__init__(message if point is None else "{0} at {1}".format(message, point))

    def at(self, point: Sequence[Any]) -> "SingularityError":
        return SingularityError(self.message, point)


class EvaluationError(CorrugatorError):
    def __init__(self, message: str, point: Optional[Sequence[Any]] = None) -> None:
        self.point = point
        super().__init__(message if point is None else "{0} at {1}".format(message, point))


class PreconditionError(CorrugatorError):
    pass


class QuadratureError(CorrugatorError):
    pass


class SearchExhaustedError(CorrugatorError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None) -> None:
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class StageVerificationError(CorrugatorError):
    def __init__(self, message: str, report: Any = None) -> None:
        self.report = report
        super().__init__(message)


class ReportSchemaError(CorrugatorError):
    pass


class ArtifactIOError(CorrugatorError):
    pass
