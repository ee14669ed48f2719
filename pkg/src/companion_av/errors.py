"""Exception hierarchy. Codes mirror the error names used in logs."""

from __future__ import annotations


class CompanionError(Exception):
    code = "ERROR"


class UnknownSubjectError(CompanionError):
    code = "UNKNOWN_SUBJECT"


class UnknownSensorError(CompanionError):
    code = "UNKNOWN_SENSOR"


class UnauthorizedOriginError(CompanionError):
    code = "UNAUTHORIZED_ORIGIN"


class PlanningError(CompanionError):
    pass


class NoRouteError(PlanningError):
    code = "NO_ROUTE"


class DurationExceededError(PlanningError):
    code = "DURATION_EXCEEDED"

    def __init__(self, message: str, cost_s: float):
        super().__init__(message)
        self.cost_s = cost_s


class NoSuitableStopError(CompanionError):
    code = "NO_SUITABLE_STOP"


class PermissionDeniedError(CompanionError):
    code = "PERMISSION_DENIED"


class ScenarioParseError(CompanionError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class ScenarioValidationError(CompanionError):
    code = "VALIDATION_ERROR"

    def __init__(self, breaches: list[str]):
        super().__init__("; ".join(breaches))
        self.breaches = list(breaches)


class LogFormatError(CompanionError):
    code = "LOG_FORMAT_ERROR"
