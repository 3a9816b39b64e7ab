"""Diagnostics and the versioned rule registry."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    LINT = "lint"


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 1

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1 or self.length < 1:
            raise ValueError(f"invalid span {self}")


@dataclass(frozen=True)
class Rule:
    code: str
    severity: Severity
    summary: str


# Bump whenever the meaning of any rule code changes.
REGISTRY_VERSION = "1"

_RULES = [
    # syntax
    Rule("R-SYN-01", Severity.ERROR, "statement does not match its grammar"),
    Rule("R-SYN-02", Severity.ERROR, "malformed identifier or keyword value"),
    Rule("R-SYN-03", Severity.ERROR, "invalid token"),
    # labels
    Rule("R-LABEL-01", Severity.ERROR, "malformed label token"),
    Rule("R-LABEL-02", Severity.ERROR, "illegal label tag chain"),
    Rule("R-LABEL-03", Severity.ERROR, "label lacks a subject prefix"),
    Rule("R-LABEL-04", Severity.ERROR, "label kind does not fit the statement"),
    # structure
    Rule("R-DUP-01", Severity.ERROR, "duplicate declaration"),
    Rule("R-REF-01", Severity.ERROR, "unresolved structural reference"),
    Rule("R-REF-02", Severity.ERROR, "reference spans several declarations"),
    Rule("R-FIS-01", Severity.ERROR, "illegal data-flow endpoints"),
    Rule("R-CA-01", Severity.WARNING, "control action label subject differs from its controller"),
    Rule("E-MAP-01", Severity.ERROR, "mapped control action has an empty function sequence"),
    Rule("R-MAP-02", Severity.WARNING, "no mapping candidates: control action lists no functions"),
    Rule("R-ELIC-02", Severity.WARNING, "finding declared in a cell marked not-applicable"),
    # traceability closure
    Rule("R1", Severity.ERROR, "vulnerability links at least one existing loss"),
    Rule("R2", Severity.ERROR, "vulnerability carries exactly one security attribute"),
    Rule("R3", Severity.ERROR, "constraint addresses at least one existing vulnerability"),
    Rule("R4", Severity.ERROR, "vulnerability addressed by at least one constraint"),
    Rule("R5", Severity.ERROR, "IFB/ICA links at least one existing vulnerability"),
    Rule("R6", Severity.ERROR, "finding has an existing parent of the correct kind"),
    Rule("R7", Severity.ERROR, "guide word belongs to the family of the finding kind"),
    Rule("R8", Severity.ERROR, "mapping endpoints exist with the stated kinds"),
    # lints
    Rule("R-NUM-01", Severity.LINT, "gap in index numbering"),
    Rule("R-DESC-01", Severity.LINT, "missing description"),
    Rule("R-SUBJ-01", Severity.LINT, "subject declared but never used"),
    Rule("R-LOSS-01", Severity.LINT, "loss not referenced by any vulnerability"),
]

RULES: dict[str, Rule] = {rule.code: rule for rule in _RULES}


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    severity: Severity
    message: str
    span: SourceSpan | None = None

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValueError(f"unregistered rule code {self.rule!r}")
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")

    @classmethod
    def of(cls, rule: str, message: str, span: SourceSpan | None = None) -> Diagnostic:
        return cls(rule, RULES[rule].severity, message, span)

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def format(self, file: str | None = None) -> str:
        if self.span is not None:
            where = f"{file or self.span.file}:{self.span.line}:{self.span.column}"
        else:
            where = f"{file or '<model>'}:0:0"
        return f"{where} {self.rule} {self.severity.value} {self.message}"

    def sort_key(self) -> tuple:
        if self.span is None:
            return (1, 0, 0, self.rule, self.message)
        return (0, self.span.line, self.span.column, self.rule, self.message)


def has_errors(diagnostics) -> bool:
    return any(d.is_error for d in diagnostics)
