"""Report tables and Graphviz DOT diagrams."""

from __future__ import annotations

from collections import defaultdict
from enum import Enum

from .elicitation import ElicitationError, Worksheet, csv_table, grid, markdown_table, scaffold
from .labels import Label, expand_merged, parse_label
from .mapping import validate_mappings
from .model import GUIDE_WORDS, AnalysisModel, External, FindingKind


class TableKind(str, Enum):
    PURPOSE = "purpose"
    IFB = "ifb"
    DF_LS = "df_ls"
    ICA = "ica"
    SEC_LS = "sec_ls"
    MAPPING = "mapping"


_FINDING_TABLES = {
    TableKind.IFB: FindingKind.IFB,
    TableKind.DF_LS: FindingKind.DF_LS,
    TableKind.ICA: FindingKind.ICA,
    TableKind.SEC_LS: FindingKind.SEC_LS,
}

_DESCRIPTION_HEADINGS = {
    FindingKind.IFB: "IFB Description:",
    FindingKind.DF_LS: "LS Description:",
    FindingKind.ICA: "ICA Description:",
    FindingKind.SEC_LS: "LS Description:",
}


def bracket_ids(ids) -> str:
    """Collapse ``["L-1", "L-2"]`` to ``L-1/2`` the way the case-study tables do."""
    ids = list(ids)
    if not ids:
        return ""
    prefix = ids[0].rsplit("-", 1)[0]
    if all(i.rsplit("-", 1)[0] == prefix for i in ids):
        return f"{prefix}-" + "/".join(i.rsplit("-", 1)[1] for i in ids)
    return "/".join(ids)


def purpose_lines(m: AnalysisModel) -> list[list[str]]:
    losses = [f"{l.id}: {l.description}" for l in m.losses]
    vulns = []
    for v in m.vulnerabilities:
        links = [bracket_ids(v.losses)] if v.losses else []
        if v.attribute is not None:
            links.append(v.attribute.value.capitalize())
        suffix = f" [{', '.join(links)}]" if links else ""
        vulns.append(f"{v.id}: {v.description}{suffix}")
    constraints = [
        f"{sc.id}: {sc.description}" + (f" [{bracket_ids(sc.addresses)}]" if sc.addresses else "")
        for sc in m.constraints
    ]
    return [losses, vulns, constraints]


def _render_purpose(m: AnalysisModel, fmt: str) -> str:
    stanzas = purpose_lines(m)
    headings = ("Losses", "Vulnerabilities", "System Constraints")
    if fmt == "csv":
        rows = [["section", "line"]]
        for heading, lines in zip(headings, stanzas):
            rows += [[heading, line] for line in lines]
        return csv_table(rows)
    out = []
    for heading, lines in zip(headings, stanzas):
        out.append(f"## {heading}")
        out.append("")
        out += [f"- {line}" for line in lines]
        if lines:
            out.append("")
    return "\n".join(out).rstrip("\n") + "\n"


def _description(m: AnalysisModel, kind: FindingKind) -> list[tuple[str, str]]:
    entries = []
    for f in sorted(m.findings_of(kind), key=lambda f: f.id.sort_key()):
        text = f.description
        if f.vulnerabilities:
            text += f" [{bracket_ids(f.vulnerabilities)}]"
        entries.append((str(f.id), text))
    return entries


def _render_findings(m: AnalysisModel, kind: FindingKind, fmt: str) -> str:
    try:
        sheet = scaffold(m, kind)
    except ElicitationError:
        sheet = Worksheet(kind, GUIDE_WORDS[kind], ())
    rows = grid(sheet, {gw: f"GW: {gw.value}" for gw in GUIDE_WORDS[kind]})
    entries = _description(m, kind)
    if fmt == "csv":
        out = csv_table(rows)
        if entries:
            out += csv_table([["label", "description"], *([l, t] for l, t in entries)])
        return out
    out = markdown_table(rows)
    if entries:
        out += f"\n**{_DESCRIPTION_HEADINGS[kind]}**\n\n"
        out += "".join(f"- {label}: {text}\n" for label, text in entries)
    return out


def _render_mapping(m: AnalysisModel, fmt: str) -> str:
    report = validate_mappings(m)
    rows = [["SEC-LS", "DF-LS", "status"]]
    rows += [[str(e.sec_ls), str(e.df_ls), "valid"] for e in report.valid]
    rows += [[str(e.sec_ls), str(e.df_ls), reason] for e, reason in report.violations]
    rows[1:] = sorted(rows[1:], key=lambda r: (parse_label(r[0]).sort_key(), parse_label(r[1]).sort_key()))
    if fmt == "csv":
        return csv_table(rows)
    out = markdown_table(rows)
    out += "\n**Unmapped STPA-Sec loss scenarios:**\n\n"
    out += "".join(f"- {l}\n" for l in report.unmapped_sec_ls) or "- (none)\n"
    out += "\n**Data-flow loss scenarios without preimage:**\n\n"
    out += "".join(f"- {l}\n" for l in report.df_ls_without_preimage) or "- (none)\n"
    return out


def render_table(m: AnalysisModel, kind: TableKind | str, format: str = "markdown") -> str:
    kind = TableKind(kind)
    fmt = "csv" if format == "csv" else "markdown"
    if format not in ("csv", "markdown", "md"):
        raise ValueError(f"unknown table format {format!r}")
    if kind is TableKind.PURPOSE:
        return _render_purpose(m, fmt)
    if kind is TableKind.MAPPING:
        return _render_mapping(m, fmt)
    return _render_findings(m, _FINDING_TABLES[kind], fmt)


# -- DOT -------------------------------------------------------------------


def dot_quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{escaped}"'


def _ext_id(ext: External) -> str:
    return f"ext:{ext.name}"


def render_fis_dot(m: AnalysisModel) -> str:
    lines = ["digraph fis {", "  rankdir=LR;", "  node [shape=box];"]
    clusters: dict[str, list[tuple[Label, str]]] = defaultdict(list)
    for f in m.functions:
        for variant in expand_merged(f.id):
            clusters[variant.subjects[0]].append((variant, f.name))
    names = {s.code: s.name for s in m.subjects}
    for code in sorted(clusters):
        lines.append(f"  subgraph {dot_quote('cluster_' + code)} {{")
        title = f"{code}: {names[code]}" if code in names else code
        lines.append(f"    label={dot_quote(title)};")
        for variant, name in sorted(clusters[code]):
            text = f"{variant}\n{name}"
            lines.append(f"    {dot_quote(str(variant))} [label={dot_quote(text)}];")
        lines.append("  }")

    externals = sorted(
        {e.name for d in m.dataflows for e in (d.source, d.sink) if isinstance(e, External)}
    )
    for name in externals:
        lines.append(f"  {dot_quote(_ext_id(External(name)))} [shape=ellipse, label={dot_quote(name)}];")

    for d in m.dataflows:
        src = _ext_id(d.source) if isinstance(d.source, External) else str(d.source)
        dst = _ext_id(d.sink) if isinstance(d.sink, External) else str(d.sink)
        lines.append(f"  {dot_quote(src)} -> {dot_quote(dst)} [label={dot_quote(f'{d.id}: {d.payload}')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_control_dot(m: AnalysisModel) -> str:
    lines = ["digraph control {", "  rankdir=TB;", "  node [shape=box];"]
    names = {s.code: s.name for s in m.subjects}
    names.update({c.code: c.name for c in m.controllers if c.name})
    nodes = {c.code for c in m.controllers}
    nodes.update(ca.controlled for ca in m.control_actions)
    nodes.update(ca.controller for ca in m.control_actions)
    nodes.update(code for fb in m.feedback for code in (fb.source, fb.sink))
    for code in sorted(nodes):
        title = f"{code}: {names[code]}" if code in names else code
        lines.append(f"  {dot_quote(code)} [label={dot_quote(title)}];")
    for ca in m.control_actions:
        lines.append(
            f"  {dot_quote(ca.controller)} -> {dot_quote(ca.controlled)} "
            f"[style=solid, label={dot_quote(f'{ca.id} {ca.name}')}];"
        )
    for fb in m.feedback:
        lines.append(
            f"  {dot_quote(fb.source)} -> {dot_quote(fb.sink)} "
            f"[style=dashed, label={dot_quote(f'{fb.id} {fb.payload}')}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


