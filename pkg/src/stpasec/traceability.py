"""Linkage discipline: closure rules R1-R8, structural checks, coverage and stats."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum

from .diagnostics import Diagnostic
from .labels import Label, LabelKind, expand_merged
from .model import (
    GUIDE_WORDS,
    AnalysisModel,
    ControlAction,
    External,
    FindingKind,
    Function,
)

# na marks and findings sit on rows of this kind, using guide words of that family
ROW_FAMILY = {
    LabelKind.FUNCTION: FindingKind.IFB,
    LabelKind.IFB: FindingKind.DF_LS,
    LabelKind.CONTROL_ACTION: FindingKind.ICA,
    LabelKind.ICA: FindingKind.SEC_LS,
}


def _fmt_ids(ids) -> str:
    return ", ".join(str(i) for i in ids)


def check_structure(m: AnalysisModel) -> list[Diagnostic]:
    """Declaration-level checks that sit outside the R1-R8 closure registry."""
    out: list[Diagnostic] = []
    out += _duplicates(m)

    subjects = {s.code for s in m.subjects}
    controllers = {c.code for c in m.controllers}

    for item in (*m.functions, *m.control_actions):
        for code in item.id.subjects:
            if code not in subjects:
                out.append(Diagnostic.of("R-REF-01", f"{item.id} uses undeclared subject {code}", item.span))
    for c in m.controllers:
        if c.code not in subjects:
            out.append(Diagnostic.of("R-REF-01", f"controller {c.code} is not a declared subject", c.span))

    for ca in m.control_actions:
        if ca.controller not in controllers:
            out.append(
                Diagnostic.of("R-REF-01", f"{ca.id} is issued by {ca.controller}, which is not a declared controller", ca.span)
            )
        if ca.controlled not in subjects:
            out.append(Diagnostic.of("R-REF-01", f"{ca.id} controls undeclared subject {ca.controlled}", ca.span))
        if ca.id.subjects != (ca.controller,):
            out.append(
                Diagnostic.of("R-CA-01", f"{ca.id} is labelled for {'/'.join(ca.id.subjects)} but issued by {ca.controller}", ca.span)
            )
        for fn in ca.functions:
            out += _reference(m, fn, f"{ca.id} function", ca.span)

    for df in m.dataflows:
        ends = (df.source, df.sink)
        if df.source == df.sink:
            out.append(Diagnostic.of("R-FIS-01", f"{df.id} starts and ends at {df.source}", df.span))
        if all(isinstance(e, External) for e in ends):
            out.append(Diagnostic.of("R-FIS-01", f"{df.id} connects no declared function", df.span))
        for end in ends:
            if isinstance(end, Label):
                if end.merged:
                    out.append(
                        Diagnostic.of("R-FIS-01", f"{df.id} endpoint {end} must name a single function instance", df.span)
                    )
                else:
                    out += _reference(m, end, f"{df.id} endpoint", df.span)

    for fb in m.feedback:
        for code in (fb.source, fb.sink):
            if code not in subjects:
                out.append(Diagnostic.of("R-REF-01", f"{fb.id} uses undeclared subject {code}", fb.span))

    for na in m.na_marks:
        out += _reference(m, na.target, "not-applicable mark on", na.span)

    out += _na_conflicts(m)
    out += _empty_sequences(m)
    return out


def _reference(m: AnalysisModel, label: Label, what: str, span) -> list[Diagnostic]:
    found = m.declarations_for(label)
    if m.resolve(label) is not None:
        return []
    if len({d.id for d in found}) == 1:
        return []  # plain duplicate, already reported as R-DUP-01
    if len(found) > 1:
        names = _fmt_ids(d.id for d in found)
        return [Diagnostic.of("R-REF-02", f"{what} {label} spans several declarations ({names})", span)]
    return [Diagnostic.of("R-REF-01", f"{what} {label} is not declared", span)]


def _duplicates(m: AnalysisModel) -> list[Diagnostic]:
    out = []

    def plain(items, key, describe):
        seen = set()
        for item in items:
            k = key(item)
            if k in seen:
                out.append(Diagnostic.of("R-DUP-01", f"duplicate {describe(item)}", item.span))
            seen.add(k)

    plain(m.subjects, lambda s: s.code, lambda s: f"subject {s.code}")
    for group in (m.losses, m.vulnerabilities, m.constraints, m.dataflows, m.feedback):
        plain(group, lambda i: i.id, lambda i: f"declaration of {i.id}")
    plain(m.controllers, lambda c: c.code, lambda c: f"controller {c.code}")
    plain(m.na_marks, lambda n: (n.target, n.guide_word), lambda n: f"na {n.target} guideword {n.guide_word.value}")
    plain(m.mappings, lambda e: (e.sec_ls, e.df_ls), lambda e: f"map {e.sec_ls} -> {e.df_ls}")
    plain(
        m.compat,
        lambda c: (c.sec_guide_word, c.df_guide_word),
        lambda c: f"compat {c.sec_guide_word.value} {c.df_guide_word.value}",
    )

    # merged declarations clash when any per-subject expansion coincides
    owner: dict[tuple[LabelKind, Label], object] = {}
    for item in (*m.functions, *m.control_actions, *m.findings):
        clash = None
        for variant in expand_merged(item.id):
            prior = owner.get((item.id.kind, variant))
            if prior is not None and clash is None:
                clash = prior
            owner.setdefault((item.id.kind, variant), item)
        if clash is not None:
            if clash.id == item.id:
                message = f"duplicate declaration of {item.id}"
            else:
                message = f"{item.id} overlaps earlier declaration {clash.id}"
            out.append(Diagnostic.of("R-DUP-01", message, item.span))
    return out


def _na_conflicts(m: AnalysisModel) -> list[Diagnostic]:
    out = []
    marks = defaultdict(list)
    for na in m.na_marks:
        row = m.resolve(na.target)
        if row is not None:
            marks[(id(row), na.guide_word)].append(na)
    for f in m.findings:
        row = m.resolve(f.parent)
        if row is None:
            continue
        for na in marks.get((id(row), f.guide_word), ()):
            out.append(
                Diagnostic.of(
                    "R-ELIC-02",
                    f"{f.id} is declared under {f.guide_word.value}, which {na.target} marks not applicable",
                    f.span,
                )
            )
    return out


def _empty_sequences(m: AnalysisModel) -> list[Diagnostic]:
    out = []
    for entry in m.mappings:
        ca = control_action_of(m, entry.sec_ls)
        if ca is not None and not ca.functions:
            out.append(
                Diagnostic.of("E-MAP-01", f"{entry.sec_ls} maps through {ca.id}, which lists no functions", entry.span)
            )
    return out


def control_action_of(m: AnalysisModel, label: Label) -> ControlAction | None:
    """The control action declaration a CA-side label descends from."""
    found = m.resolve(label.root())
    return found if isinstance(found, ControlAction) else None


def function_of(m: AnalysisModel, label: Label) -> Function | None:
    found = m.resolve(label.root())
    return found if isinstance(found, Function) else None


# -- closure ---------------------------------------------------------------


def check_closure(m: AnalysisModel) -> list[Diagnostic]:
    """Evaluate R1-R8.  Empty iff the model is closed."""
    losses = {l.id for l in m.losses}
    vulns = {v.id for v in m.vulnerabilities}
    by_rule: dict[str, list[Diagnostic]] = defaultdict(list)

    def emit(rule: str, message: str, span) -> None:
        by_rule[rule].append(Diagnostic.of(rule, message, span))

    for v in m.vulnerabilities:
        if not v.losses:
            emit("R1", f"{v.id} links no loss", v.span)
        for l in v.losses:
            if l not in losses:
                emit("R1", f"{v.id} references unknown loss {l}", v.span)
        if v.attribute is None:
            emit("R2", f"{v.id} has no security attribute", v.span)

    addressed = set()
    for sc in m.constraints:
        if not sc.addresses:
            emit("R3", f"{sc.id} addresses no vulnerability", sc.span)
        for ref in sc.addresses:
            if ref not in vulns:
                emit("R3", f"{sc.id} addresses unknown vulnerability {ref}", sc.span)
            addressed.add(ref)
    for v in m.vulnerabilities:
        if v.id not in addressed:
            emit("R4", f"{v.id} is not addressed by any system constraint", v.span)

    for f in m.findings:
        if f.kind in (FindingKind.IFB, FindingKind.ICA) and not f.vulnerabilities:
            emit("R5", f"{f.id} links no vulnerability", f.span)
        for ref in f.vulnerabilities:
            if ref not in vulns:
                emit("R5", f"{f.id} references unknown vulnerability {ref}", f.span)

        parent = f.parent
        if m.resolve(parent) is None:
            hits = m.declarations_for(parent)
            if len({h.id for h in hits}) == 1:
                pass  # duplicate parent, reported as R-DUP-01
            elif len(hits) > 1:
                emit("R6", f"{f.id} has an ambiguous parent {parent} ({_fmt_ids(h.id for h in hits)})", f.span)
            else:
                emit("R6", f"{f.id} has no declared parent {parent.kind.value} {parent}", f.span)

        if f.guide_word.family is not f.kind:
            emit("R7", f"{f.id} uses {f.guide_word.value}, which belongs to the {f.guide_word.family.value} family", f.span)

    for na in m.na_marks:
        family = ROW_FAMILY[na.target.kind]
        if na.guide_word.family is not family:
            emit("R7", f"na {na.target} uses {na.guide_word.value}, which is outside the {family.value} family", na.span)
    for c in m.compat:
        if c.sec_guide_word.family is not FindingKind.SEC_LS or c.df_guide_word.family is not FindingKind.DF_LS:
            emit("R7", f"compat {c.sec_guide_word.value} {c.df_guide_word.value} mixes guide-word families", c.span)

    for e in m.mappings:
        for end in (e.sec_ls, e.df_ls):
            if m.resolve(end) is None:
                emit("R8", f"mapping endpoint {end} is not a declared {end.kind.value}", e.span)

    return [d for rule in ("R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8") for d in by_rule[rule]]


# -- coverage --------------------------------------------------------------


class Relation(str, Enum):
    LOSS_VULN = "loss_vuln"
    VULN_CONSTRAINT = "vuln_constraint"
    VULN_FINDING = "vuln_finding"


@dataclass(frozen=True)
class CoverageMatrix:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: tuple[tuple[bool, ...], ...]

    def __getitem__(self, key: tuple[str, str]) -> bool:
        row, col = key
        return self.cells[self.rows.index(row)][self.columns.index(col)]

    def row_sums(self) -> dict[str, int]:
        return {r: sum(cells) for r, cells in zip(self.rows, self.cells)}

    def column_sums(self) -> dict[str, int]:
        return {c: sum(row[j] for row in self.cells) for j, c in enumerate(self.columns)}


def coverage(m: AnalysisModel, relation: Relation | str) -> CoverageMatrix:
    relation = Relation(relation)
    rows = tuple(v.id for v in m.vulnerabilities)
    if relation is Relation.LOSS_VULN:
        columns = tuple(l.id for l in m.losses)
        links = {(v.id, l) for v in m.vulnerabilities for l in v.losses}
    elif relation is Relation.VULN_CONSTRAINT:
        columns = tuple(sc.id for sc in m.constraints)
        links = {(v, sc.id) for sc in m.constraints for v in sc.addresses}
    else:
        findings = sorted(m.findings, key=lambda f: f.id.sort_key())
        columns = tuple(str(f.id) for f in findings)
        links = {(v, str(f.id)) for f in findings for v in f.vulnerabilities}
    cells = tuple(tuple((r, c) in links for c in columns) for r in rows)
    return CoverageMatrix(rows, columns, cells)


# -- stats -----------------------------------------------------------------


@dataclass(frozen=True)
class ModelStats:
    counts: dict[str, int]
    findings_per_guide_word: dict[str, int]
    findings_per_subject: dict[str, int]
    findings_per_parent: dict[str, int] = field(default_factory=dict)

    def __getitem__(self, key: str) -> int:
        return self.counts[key]

    def lines(self) -> list[str]:
        out = [f"{k}={v}" for k, v in self.counts.items()]
        out += [f"guide_word.{k}={v}" for k, v in self.findings_per_guide_word.items()]
        out += [f"subject.{k}={v}" for k, v in self.findings_per_subject.items()]
        out += [f"parent.{k}={v}" for k, v in self.findings_per_parent.items()]
        return out


def stats(m: AnalysisModel) -> ModelStats:
    counts = {
        "subjects": len(m.subjects),
        "losses": len(m.losses),
        "vulnerabilities": len(m.vulnerabilities),
        "constraints": len(m.constraints),
        "functions": len(m.functions),
        "dataflows": len(m.dataflows),
        "controllers": len(m.controllers),
        "control_actions": len(m.control_actions),
        "feedback": len(m.feedback),
    }
    for kind in FindingKind:
        counts[kind.value.lower()] = len(m.findings_of(kind))
    counts["na_marks"] = len(m.na_marks)
    counts["mappings"] = len(m.mappings)

    per_gw = Counter(f.guide_word for f in m.findings)
    per_subject = Counter(code for f in m.findings for code in f.id.subjects)
    per_parent: Counter[Label] = Counter()
    for f in m.findings:
        row = m.resolve(f.parent)
        per_parent[row.id if row is not None else f.parent] += 1

    return ModelStats(
        counts=counts,
        findings_per_guide_word={
            gw.value: per_gw.get(gw, 0) for kind in FindingKind for gw in GUIDE_WORDS[kind]
        },
        findings_per_subject={s.code: per_subject.get(s.code, 0) for s in m.subjects},
        findings_per_parent={str(k): per_parent[k] for k in sorted(per_parent)},
    )
