"""Domain types for a security analysis model.

Every entity is a frozen dataclass.  Source spans ride along for
diagnostics but never take part in equality.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field, fields
from enum import Enum
from functools import cached_property
from typing import Any, Iterable, Union

from .diagnostics import SourceSpan
from .labels import Label, LabelKind, expand_merged


class LossCategory(str, Enum):
    LIFE = "life"
    PHYSICAL_PROPERTY = "physical_property"
    NON_PHYSICAL_PROPERTY = "non_physical_property"
    ENVIRONMENT = "environment"

    @property
    def title(self) -> str:
        return _LOSS_CATEGORY_TEXT[self][0]

    @property
    def description(self) -> str:
        return _LOSS_CATEGORY_TEXT[self][1]


_LOSS_CATEGORY_TEXT = {
    LossCategory.LIFE: ("Loss of life or cause injury to life", "Includes human and animal life"),
    LossCategory.PHYSICAL_PROPERTY: (
        "Loss of physical property",
        "Represents physical objects belonging to stakeholders (e.g. devices)",
    ),
    LossCategory.NON_PHYSICAL_PROPERTY: (
        "Loss of non-physical property",
        "Represents virtual properties belonging to stakeholders (e.g. sensitive information, reputation)",
    ),
    LossCategory.ENVIRONMENT: ("Loss of environment", "Includes the natural or artificial world"),
}


class SecurityAttribute(str, Enum):
    CONFIDENTIALITY = "confidentiality"
    INTEGRITY = "integrity"
    AVAILABILITY = "availability"


class SubjectKind(str, Enum):
    TECHNICAL = "technical"
    HUMAN = "human"
    ORGANIZATION = "organization"


class FindingKind(str, Enum):
    IFB = "IFB"
    DF_LS = "DF_LS"
    ICA = "ICA"
    SEC_LS = "SEC_LS"

    @property
    def label_kind(self) -> LabelKind:
        return _FINDING_LABEL_KIND[self]

    @property
    def parent_kind(self) -> LabelKind:
        return _FINDING_PARENT_KIND[self]


_FINDING_LABEL_KIND = {
    FindingKind.IFB: LabelKind.IFB,
    FindingKind.DF_LS: LabelKind.DF_LS,
    FindingKind.ICA: LabelKind.ICA,
    FindingKind.SEC_LS: LabelKind.SEC_LS,
}
_FINDING_PARENT_KIND = {
    FindingKind.IFB: LabelKind.FUNCTION,
    FindingKind.DF_LS: LabelKind.IFB,
    FindingKind.ICA: LabelKind.CONTROL_ACTION,
    FindingKind.SEC_LS: LabelKind.ICA,
}


class GuideWord(str, Enum):
    # insecure function behaviours
    NECV = "NECV"
    ECV = "ECV"
    TI = "TI"
    # data-flow loss scenarios
    FUNCTION_ITSELF = "function_itself"
    ENV_INPUTS = "env_inputs"
    ENV_CALLING = "env_calling"
    ENV_COMPUTING = "env_computing"
    ENV_LINKS = "env_links"
    # insecure control actions
    NOT_PROVIDING = "not_providing"
    PROVIDING = "providing"
    TIMING = "timing"
    # control-structure loss scenarios
    CONTROLLER = "controller"
    CONTROL_PATH = "control_path"
    CONTROLLED_PROCESS = "controlled_process"
    FEEDBACK_PATH = "feedback_path"

    @property
    def family(self) -> FindingKind:
        for kind, members in GUIDE_WORDS.items():
            if self in members:
                return kind
        raise AssertionError(self)


# Column order matches the standard worksheet templates.
GUIDE_WORDS: dict[FindingKind, tuple[GuideWord, ...]] = {
    FindingKind.IFB: (GuideWord.NECV, GuideWord.ECV, GuideWord.TI),
    FindingKind.DF_LS: (
        GuideWord.FUNCTION_ITSELF,
        GuideWord.ENV_INPUTS,
        GuideWord.ENV_CALLING,
        GuideWord.ENV_COMPUTING,
        GuideWord.ENV_LINKS,
    ),
    FindingKind.ICA: (GuideWord.NOT_PROVIDING, GuideWord.PROVIDING, GuideWord.TIMING),
    FindingKind.SEC_LS: (
        GuideWord.CONTROLLER,
        GuideWord.CONTROL_PATH,
        GuideWord.CONTROLLED_PROCESS,
        GuideWord.FEEDBACK_PATH,
    ),
}

GUIDE_WORD_TITLES = {
    GuideWord.NECV: "Not being Executed Causes Vulnerabilities (NECV)",
    GuideWord.ECV: "being Executed Causes Vulnerabilities (ECV)",
    GuideWord.TI: "Timing Issues (TI)",
    GuideWord.FUNCTION_ITSELF: "Function Itself",
    GuideWord.ENV_INPUTS: "Env- Function Inputs",
    GuideWord.ENV_CALLING: "Env- Calling Behaviors",
    GuideWord.ENV_COMPUTING: "Env- Computing Resources",
    GuideWord.ENV_LINKS: "Env- Links",
    GuideWord.NOT_PROVIDING: "Not Providing",
    GuideWord.PROVIDING: "Providing",
    GuideWord.TIMING: "Timing Issues",
    GuideWord.CONTROLLER: "Controller",
    GuideWord.CONTROL_PATH: "Control Path",
    GuideWord.CONTROLLED_PROCESS: "Controlled Process",
    GuideWord.FEEDBACK_PATH: "Feedback Path",
}


class CompatLevel(str, Enum):
    STRONG = "strong"
    PLAUSIBLE = "plausible"
    INCOMPATIBLE = "incompatible"

    @property
    def rank(self) -> int:
        return {"strong": 2, "plausible": 1, "incompatible": 0}[self.value]


_ID_RE = re.compile(r"(L|V|SC|DF|FB)-([1-9][0-9]*)\Z")


def id_prefix(ident: str) -> str | None:
    m = _ID_RE.match(ident)
    return m.group(1) if m else None


def id_key(ident: str) -> tuple[str, int]:
    m = _ID_RE.match(ident)
    if m is None:
        return (ident, 0)
    return (m.group(1), int(m.group(2)))


def _span() -> Any:
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Subject:
    code: str
    name: str
    kind: SubjectKind
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Loss:
    id: str
    description: str
    category: LossCategory
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Vulnerability:
    id: str
    description: str
    attribute: SecurityAttribute | None
    losses: tuple[str, ...]
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class SystemConstraint:
    id: str
    description: str
    addresses: tuple[str, ...]
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Function:
    id: Label
    name: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class External:
    """A data-flow endpoint outside the modelled functions."""

    name: str

    def __str__(self) -> str:
        return f"ext:{self.name}"


Endpoint = Union[Label, External]


@dataclass(frozen=True)
class DataFlow:
    id: str
    source: Endpoint
    sink: Endpoint
    payload: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Controller:
    code: str
    name: str = ""
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class ControlAction:
    id: Label
    name: str
    controller: str
    controlled: str
    functions: tuple[Label, ...]
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Feedback:
    id: str
    source: str
    sink: str
    payload: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Finding:
    kind: FindingKind
    id: Label
    guide_word: GuideWord
    description: str
    vulnerabilities: tuple[str, ...] = ()
    span: SourceSpan | None = _span()

    @property
    def parent(self) -> Label:
        parent = self.id.parent()
        assert parent is not None
        return parent


@dataclass(frozen=True)
class NaMark:
    """Analyst assertion that a guide word does not apply to a row."""

    target: Label
    guide_word: GuideWord
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class MappingEntry:
    sec_ls: Label
    df_ls: Label
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class CompatOverride:
    sec_guide_word: GuideWord
    df_guide_word: GuideWord
    level: CompatLevel
    span: SourceSpan | None = _span()


def _label_sorted(items: Iterable, key=lambda item: item.id):
    return tuple(sorted(items, key=lambda item: key(item).sort_key()))


def _id_sorted(items: Iterable):
    return tuple(sorted(items, key=lambda item: id_key(item.id)))


@dataclass(frozen=True)
class AnalysisModel:
    """A complete analysis.  Collections are normalised to canonical order."""

    system: str = ""
    subjects: tuple[Subject, ...] = ()
    losses: tuple[Loss, ...] = ()
    vulnerabilities: tuple[Vulnerability, ...] = ()
    constraints: tuple[SystemConstraint, ...] = ()
    functions: tuple[Function, ...] = ()
    dataflows: tuple[DataFlow, ...] = ()
    controllers: tuple[Controller, ...] = ()
    control_actions: tuple[ControlAction, ...] = ()
    feedback: tuple[Feedback, ...] = ()
    findings: tuple[Finding, ...] = ()
    na_marks: tuple[NaMark, ...] = ()
    mappings: tuple[MappingEntry, ...] = ()
    compat: tuple[CompatOverride, ...] = ()

    def __post_init__(self) -> None:
        normalised = {
            "subjects": tuple(sorted(self.subjects, key=lambda s: s.code)),
            "losses": _id_sorted(self.losses),
            "vulnerabilities": _id_sorted(self.vulnerabilities),
            "constraints": _id_sorted(self.constraints),
            "functions": _label_sorted(self.functions),
            "dataflows": _id_sorted(self.dataflows),
            "controllers": tuple(sorted(self.controllers, key=lambda c: c.code)),
            "control_actions": _label_sorted(self.control_actions),
            "feedback": _id_sorted(self.feedback),
            "findings": tuple(
                sorted(self.findings, key=lambda f: (_KIND_ORDER[f.kind], f.id.sort_key()))
            ),
            "na_marks": tuple(
                sorted(self.na_marks, key=lambda n: (n.target.sort_key(), n.guide_word.value))
            ),
            "mappings": tuple(
                sorted(self.mappings, key=lambda e: (e.sec_ls.sort_key(), e.df_ls.sort_key()))
            ),
            "compat": tuple(
                sorted(self.compat, key=lambda c: (c.sec_guide_word.value, c.df_guide_word.value))
            ),
        }
        for name, value in normalised.items():
            object.__setattr__(self, name, value)

    # -- lookups -----------------------------------------------------------

    def findings_of(self, kind: FindingKind) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.kind is kind)

    @cached_property
    def _by_id(self) -> dict[str, dict[str, object]]:
        table: dict[str, dict[str, object]] = defaultdict(dict)
        for group in (self.losses, self.vulnerabilities, self.constraints, self.dataflows, self.feedback):
            for item in group:
                table[type(item).__name__].setdefault(item.id, item)
        return table

    def loss(self, ident: str) -> Loss | None:
        return self._by_id["Loss"].get(ident)  # type: ignore[return-value]

    def vulnerability(self, ident: str) -> Vulnerability | None:
        return self._by_id["Vulnerability"].get(ident)  # type: ignore[return-value]

    def subject(self, code: str) -> Subject | None:
        return next((s for s in self.subjects if s.code == code), None)

    @cached_property
    def _variants(self) -> dict[LabelKind, dict[Label, list[object]]]:
        """Single-subject label -> declarations covering it, per label kind."""
        table: dict[LabelKind, dict[Label, list[object]]] = defaultdict(lambda: defaultdict(list))
        for item in (*self.functions, *self.control_actions, *self.findings):
            for variant in expand_merged(item.id):
                table[item.id.kind][variant].append(item)
        return table

    def declarations_for(self, label: Label) -> list[object]:
        """Distinct declarations covering any single-subject variant of ``label``."""
        seen: list[object] = []
        for variant in expand_merged(label):
            for item in self._variants[label.kind].get(variant, ()):
                if not any(item is s for s in seen):
                    seen.append(item)
        return seen

    def resolve(self, label: Label):
        """The unique declaration covering every variant of ``label``, else None."""
        found = None
        for variant in expand_merged(label):
            hits = self._variants[label.kind].get(variant, ())
            if len(hits) != 1:
                return None
            if found is None:
                found = hits[0]
            elif hits[0] is not found:
                return None
        return found

    def inputs_of(self, function: Function) -> tuple[DataFlow, ...]:
        variants = set(expand_merged(function.id))
        return tuple(d for d in self.dataflows if isinstance(d.sink, Label) and d.sink in variants)

    def outputs_of(self, function: Function) -> tuple[DataFlow, ...]:
        variants = set(expand_merged(function.id))
        return tuple(d for d in self.dataflows if isinstance(d.source, Label) and d.source in variants)

    def is_empty(self) -> bool:
        return not self.system and not any(
            getattr(self, f.name) for f in fields(self) if f.name != "system"
        )


_KIND_ORDER = {FindingKind.IFB: 0, FindingKind.DF_LS: 1, FindingKind.ICA: 2, FindingKind.SEC_LS: 3}
