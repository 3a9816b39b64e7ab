"""Structured labels such as ``P/S/D_F2_IFB3_LS1``.

A label is a ``/``-separated list of subject codes followed by one or more
``_<TAG><index>`` segments.  Only the chains below are legal::

    F  F_IFB  F_IFB_LS  CA  CA_ICA  CA_ICA_LS
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering


class Tag(str, Enum):
    F = "F"
    CA = "CA"
    IFB = "IFB"
    ICA = "ICA"
    LS = "LS"

    @property
    def rank(self) -> int:
        return _TAG_RANK[self]


_TAG_RANK = {Tag.F: 0, Tag.CA: 1, Tag.IFB: 2, Tag.ICA: 3, Tag.LS: 4}


class LabelKind(str, Enum):
    FUNCTION = "function"
    IFB = "ifb"
    DF_LS = "df_ls"
    CONTROL_ACTION = "control_action"
    ICA = "ica"
    SEC_LS = "sec_ls"


_CHAINS: dict[tuple[Tag, ...], LabelKind] = {
    (Tag.F,): LabelKind.FUNCTION,
    (Tag.F, Tag.IFB): LabelKind.IFB,
    (Tag.F, Tag.IFB, Tag.LS): LabelKind.DF_LS,
    (Tag.CA,): LabelKind.CONTROL_ACTION,
    (Tag.CA, Tag.ICA): LabelKind.ICA,
    (Tag.CA, Tag.ICA, Tag.LS): LabelKind.SEC_LS,
}

SUBJECT_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")
_SEGMENT_RE = re.compile(r"(F|CA|IFB|ICA|LS)([1-9][0-9]*)\Z")
_SEGMENT_LIKE_RE = re.compile(r"(F|CA|IFB|ICA|LS)[0-9]+\Z")

# Error codes, one per failure class.
MALFORMED = "R-LABEL-01"
ILLEGAL_CHAIN = "R-LABEL-02"
MISSING_SUBJECT = "R-LABEL-03"


class LabelError(ValueError):
    """Raised by :func:`parse_label`; ``offset`` is a byte offset into the input."""

    def __init__(self, code: str, offset: int, message: str) -> None:
        super().__init__(f"{code} at offset {offset}: {message}")
        self.code = code
        self.offset = offset
        self.message = message


@total_ordering
@dataclass(frozen=True)
class Label:
    subjects: tuple[str, ...]
    segments: tuple[tuple[Tag, int], ...]

    def __post_init__(self) -> None:
        if not self.subjects:
            raise ValueError("label needs at least one subject")
        if self.chain not in _CHAINS:
            raise ValueError(f"illegal tag chain {'_'.join(t.value for t in self.chain)}")
        if any(index < 1 for _, index in self.segments):
            raise ValueError("label indices must be positive")
        if len(set(self.subjects)) != len(self.subjects):
            raise ValueError("duplicate subject in label")

    @property
    def chain(self) -> tuple[Tag, ...]:
        return tuple(tag for tag, _ in self.segments)

    @property
    def kind(self) -> LabelKind:
        return _CHAINS[self.chain]

    @property
    def index(self) -> int:
        return self.segments[-1][1]

    @property
    def merged(self) -> bool:
        return len(self.subjects) > 1

    def parent(self) -> Label | None:
        if len(self.segments) == 1:
            return None
        return Label(self.subjects, self.segments[:-1])

    def root(self) -> Label:
        """The function or control action this label hangs off."""
        return Label(self.subjects, self.segments[:1])

    def with_subjects(self, subjects: tuple[str, ...]) -> Label:
        return Label(tuple(subjects), self.segments)

    def sort_key(self) -> tuple:
        return (self.subjects, tuple((tag.rank, index) for tag, index in self.segments))

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Label):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return render_label(self)


def parse_label(text: str) -> Label:
    if not text:
        raise LabelError(MALFORMED, 0, "empty label")
    parts = text.split("_")
    head = parts[0]
    if head == "":
        raise LabelError(MISSING_SUBJECT, 0, "empty subject list")
    if _SEGMENT_LIKE_RE.match(head):
        raise LabelError(MISSING_SUBJECT, 0, f"missing subject prefix before {head!r}")
    if len(parts) == 1:
        raise LabelError(MALFORMED, len(text), "label has no tag segment")

    subjects: list[str] = []
    offset = 0
    for code in head.split("/"):
        if code == "":
            raise LabelError(MISSING_SUBJECT, offset, "empty subject code")
        if not SUBJECT_RE.match(code):
            raise LabelError(MALFORMED, offset, f"malformed subject code {code!r}")
        if code in subjects:
            raise LabelError(MALFORMED, offset, f"subject {code!r} repeated")
        subjects.append(code)
        offset += len(code.encode("utf-8")) + 1

    segments: list[tuple[Tag, int]] = []
    offset = len(head.encode("utf-8")) + 1
    for part in parts[1:]:
        m = _SEGMENT_RE.match(part)
        if m is None:
            raise LabelError(MALFORMED, offset, f"malformed segment {part!r}")
        segments.append((Tag(m.group(1)), int(m.group(2))))
        chain = tuple(tag for tag, _ in segments)
        if not any(full[: len(chain)] == chain for full in _CHAINS):
            raise LabelError(
                ILLEGAL_CHAIN, offset, f"{m.group(1)} cannot follow {'_'.join(t.value for t in chain[:-1]) or 'subjects'}"
            )
        offset += len(part.encode("utf-8")) + 1
    return Label(tuple(subjects), tuple(segments))


def render_label(label: Label) -> str:
    return "/".join(label.subjects) + "".join(f"_{tag.value}{index}" for tag, index in label.segments)


def expand_merged(label: Label) -> list[Label]:
    if not label.merged:
        return [label]
    return [Label((code,), label.segments) for code in label.subjects]


def canonical_order(a: Label, b: Label) -> int:
    """Three-way comparison usable with :func:`functools.cmp_to_key`."""
    ka, kb = a.sort_key(), b.sort_key()
    return (ka > kb) - (ka < kb)
