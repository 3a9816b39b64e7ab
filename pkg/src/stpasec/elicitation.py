"""Guide-word worksheets and elicitation completeness."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .labels import Label
from .model import GUIDE_WORDS, AnalysisModel, FindingKind, GuideWord

NA = "/"

ROW_HEADERS = {
    FindingKind.IFB: "F",
    FindingKind.DF_LS: "IFBs",
    FindingKind.ICA: "CA",
    FindingKind.SEC_LS: "ICAs",
}


class ElicitationError(ValueError):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code


class CellState(str, Enum):
    FILLED = "filled"
    MARKED_NA = "marked_na"
    BLANK = "blank"


@dataclass(frozen=True)
class Cell:
    state: CellState
    findings: tuple[Label, ...] = ()

    def text(self) -> str:
        if self.state is CellState.FILLED:
            return ", ".join(str(f) for f in self.findings)
        if self.state is CellState.MARKED_NA:
            return NA
        return ""


@dataclass(frozen=True)
class Row:
    label: Label
    title: str
    cells: tuple[Cell, ...]


@dataclass(frozen=True)
class Worksheet:
    kind: FindingKind
    columns: tuple[GuideWord, ...]
    rows: tuple[Row, ...]

    def cell(self, row: Label | str, column: GuideWord | str) -> Cell:
        col = self.columns.index(GuideWord(column))
        for r in self.rows:
            if str(r.label) == str(row):
                return r.cells[col]
        raise KeyError(row)

    @property
    def cells(self) -> dict[tuple[Label, GuideWord], Cell]:
        return {(r.label, gw): c for r in self.rows for gw, c in zip(self.columns, r.cells)}

    def finding_count(self) -> int:
        return sum(len(c.findings) for r in self.rows for c in r.cells)


def _parents(m: AnalysisModel, kind: FindingKind) -> list[tuple[Label, str, object]]:
    if kind is FindingKind.IFB:
        return [(f.id, f"{f.id}: {f.name}", f) for f in m.functions]
    if kind is FindingKind.ICA:
        return [(ca.id, f"{ca.id}: {ca.name}", ca) for ca in m.control_actions]
    parent_kind = FindingKind.IFB if kind is FindingKind.DF_LS else FindingKind.ICA
    return [(f.id, str(f.id), f) for f in sorted(m.findings_of(parent_kind), key=lambda f: f.id.sort_key())]


def scaffold(m: AnalysisModel, kind: FindingKind | str) -> Worksheet:
    kind = FindingKind(kind)
    parents = _parents(m, kind)
    if not parents and kind in (FindingKind.DF_LS, FindingKind.SEC_LS):
        needed = "IFB" if kind is FindingKind.DF_LS else "ICA"
        raise ElicitationError("E-ELIC-01", f"a {kind.value} worksheet needs at least one {needed}")

    columns = GUIDE_WORDS[kind]
    slots: dict[tuple[int, GuideWord], list[Label]] = {}
    for f in m.findings_of(kind):
        row = m.resolve(f.parent)
        if row is None or f.guide_word not in columns:
            raise ValueError(f"{f.id} does not fit the {kind.value} worksheet; validate the model first")
        slots.setdefault((id(row), f.guide_word), []).append(f.id)
    na = set()
    for mark in m.na_marks:
        row = m.resolve(mark.target)
        if row is not None:
            na.add((id(row), mark.guide_word))

    rows = []
    for label, title, decl in parents:
        cells = []
        for gw in columns:
            found = slots.get((id(decl), gw))
            if found:
                cells.append(Cell(CellState.FILLED, tuple(sorted(found))))
            elif (id(decl), gw) in na:
                cells.append(Cell(CellState.MARKED_NA))
            else:
                cells.append(Cell(CellState.BLANK))
        rows.append(Row(label, title, tuple(cells)))
    return Worksheet(kind, columns, tuple(rows))


@dataclass(frozen=True)
class CompletenessReport:
    total: int
    filled: int
    marked_na: int
    blank: tuple[tuple[Label, GuideWord], ...]

    @property
    def ratio(self) -> float:
        # a worksheet without cells has nothing left to consider
        if self.total == 0:
            return 1.0
        return float(Fraction(self.filled + self.marked_na, self.total))


def completeness(w: Worksheet) -> CompletenessReport:
    filled = marked = 0
    blank = []
    for row in w.rows:
        for gw, cell in zip(w.columns, row.cells):
            if cell.state is CellState.FILLED:
                filled += 1
            elif cell.state is CellState.MARKED_NA:
                marked += 1
            else:
                blank.append((row.label, gw))
    return CompletenessReport(len(w.rows) * len(w.columns), filled, marked, tuple(blank))


def _md_cell(text: str) -> str:
    return " ".join(text.replace("|", "\\|").splitlines())


def grid(w: Worksheet, header_names: dict[GuideWord, str] | None = None) -> list[list[str]]:
    names = header_names or {}
    header = [ROW_HEADERS[w.kind], *(names.get(gw, gw.value) for gw in w.columns)]
    return [header, *([row.title, *(c.text() for c in row.cells)] for row in w.rows)]


def markdown_table(rows: list[list[str]]) -> str:
    header, *body = rows
    lines = ["| " + " | ".join(_md_cell(h) for h in header) + " |"]
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in body:
        lines.append("| " + " | ".join(_md_cell(c) for c in row) + " |")
    return "\n".join(lines) + "\n"


def csv_table(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def emit_worksheet(w: Worksheet, format: str = "markdown") -> str:
    rows = grid(w)
    if format in ("markdown", "md"):
        return markdown_table(rows)
    if format == "csv":
        return csv_table(rows)
    raise ValueError(f"unknown worksheet format {format!r}")
