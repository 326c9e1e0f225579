"""Exception hierarchy and the finding record shared by all checkers."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class Finding:
    """One diagnostic produced by a checker. Findings are data, not failures."""

    code: str
    message: str
    subjects: tuple[str, ...] = field(default=())
    severity: str = "error"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "subjects": list(self.subjects),
            "severity": self.severity,
        }

    def __str__(self) -> str:
        return f"{self.severity}[{self.code}]: {self.message}"


class AitsError(Exception):
    """Base class for engine errors."""

    exit_code = 10


class DSLError(AitsError, ValueError):
    """Parse or validation error in a spec or extension source."""

    exit_code = 10

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 expected: frozenset[str] | None = None) -> None:
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected or frozenset()
        where = f"{line}:{column}: " if line is not None else ""
        hint = ""
        if self.expected:
            hint = " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(f"{where}{message}{hint}")


class MergeError(AitsError, ValueError):
    """An extension cannot be applied to a core spec."""

    exit_code = 10


class OntologyError(AitsError, ValueError):
    exit_code = 11

    def __init__(self, message: str, findings: list[Finding] | None = None) -> None:
        self.findings = list(findings or [])
        super().__init__(message)


class CatalogueError(AitsError):
    exit_code = 12

    def __init__(self, message: str, findings: list[Finding] | None = None) -> None:
        self.findings = list(findings or [])
        super().__init__(message)


class EvidenceError(AitsError, ValueError):
    exit_code = 13


class AggregationError(AitsError, ValueError):
    exit_code = 14


class IncomparabilityError(AggregationError):
    """Raised under the strict policy when one metric carries several definitions."""

    def __init__(self, offenders: dict[str, list[str]]) -> None:
        self.offenders = offenders
        parts = [f"{m} -> {', '.join(defs)}" for m, defs in sorted(offenders.items())]
        super().__init__("incomparable metric definitions: " + "; ".join(parts))


class ConfigError(AitsError, ValueError):
    exit_code = 15
