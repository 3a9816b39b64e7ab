"""Reader and printer for the ``.stpa`` model format.

One statement per line; indented lines continue the statement above.
``#`` starts a comment outside string literals.  Each statement is
parsed on its own, so one bad statement never hides the next.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterator

from .diagnostics import Diagnostic, SourceSpan, has_errors
from .labels import SUBJECT_RE, Label, LabelError, LabelKind, parse_label, render_label
from .model import (
    AnalysisModel,
    CompatLevel,
    CompatOverride,
    ControlAction,
    Controller,
    DataFlow,
    External,
    Feedback,
    Finding,
    FindingKind,
    Function,
    GuideWord,
    Loss,
    LossCategory,
    MappingEntry,
    NaMark,
    SecurityAttribute,
    Subject,
    SubjectKind,
    SystemConstraint,
    Vulnerability,
    id_key,
    id_prefix,
)

HEADER = "# stpasec model"

_ESCAPES = {"n": "\n", "r": "\r", "t": "\t"}
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#.*)
  | (?P<ext>ext:"(?:[^"\\]|\\.)*")
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<arrow>->)
  | (?P<word>[^\s"\#]+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # word | string | ext | arrow
    text: str
    value: str
    line: int
    column: int

    def span(self, file: str, extra: int = 0) -> SourceSpan:
        return SourceSpan(file, self.line, self.column + extra, max(1, len(self.text) - extra))


class _StatementError(Exception):
    def __init__(self, rule: str, message: str, span: SourceSpan) -> None:
        super().__init__(message)
        self.rule = rule
        self.message = message
        self.span = span


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


def _escape(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"')
    return out.replace("\n", "\\n").replace("\r", "\\r")


def _quote(text: str) -> str:
    return f'"{_escape(text)}"'


def _tokenize_line(text: str, lineno: int, file: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            # only an unterminated string literal can fail to match
            raise _StatementError(
                "R-SYN-03", "unterminated string literal", SourceSpan(file, lineno, pos + 1, len(text) - pos)
            )
        kind = m.lastgroup
        raw = m.group()
        if kind == "comment":
            break
        if kind == "string":
            tokens.append(Token("string", raw, _unescape(raw[1:-1]), lineno, pos + 1))
        elif kind == "ext":
            tokens.append(Token("ext", raw, _unescape(raw[5:-1]), lineno, pos + 1))
        elif kind in ("arrow", "word"):
            tokens.append(Token(kind, raw, raw, lineno, pos + 1))
        pos = m.end()
    return tokens


def _logical_statements(source: str, file: str, diagnostics: list[Diagnostic]) -> Iterator[list[Token]]:
    current: list[Token] | None = None
    broken = False
    for lineno, raw in enumerate(source.split("\n"), start=1):
        line = raw[:-1] if raw.endswith("\r") else raw
        try:
            tokens = _tokenize_line(line, lineno, file)
        except _StatementError as exc:
            diagnostics.append(Diagnostic.of(exc.rule, exc.message, exc.span))
            # a bad continuation line discards the statement it belongs to
            if not line[:1].isspace() and current:
                yield current
            current = None
            broken = True
            continue
        if not tokens:
            continue
        if line[:1].isspace():
            if current is None:
                if not broken:
                    diagnostics.append(
                        Diagnostic.of(
                            "R-SYN-01",
                            "indented continuation without a statement",
                            tokens[0].span(file),
                        )
                    )
                continue
            current.extend(tokens)
        else:
            if current:
                yield current
            current = tokens
            broken = False
    if current:
        yield current


class _Cursor:
    def __init__(self, tokens: list[Token], file: str) -> None:
        self.tokens = tokens
        self.file = file
        self.pos = 1  # tokens[0] is the keyword

    @property
    def head(self) -> Token:
        return self.tokens[0]

    def fail(self, message: str, token: Token | None = None, rule: str = "R-SYN-01") -> _StatementError:
        token = token or (self.tokens[self.pos] if self.pos < len(self.tokens) else self.tokens[-1])
        return _StatementError(rule, message, token.span(self.file))

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok is None:
            raise _StatementError(
                "R-SYN-01", f"{self.head.value}: expected {what} at end of statement", self.tokens[-1].span(self.file)
            )
        if tok.kind != kind:
            raise self.fail(f"{self.head.value}: expected {what}, found {tok.text!r}")
        self.pos += 1
        return tok

    def any(self, what: str) -> Token:
        tok = self.peek()
        if tok is None:
            raise _StatementError(
                "R-SYN-01", f"{self.head.value}: expected {what} at end of statement", self.tokens[-1].span(self.file)
            )
        self.pos += 1
        return tok

    def word(self, what: str) -> Token:
        return self.take("word", what)

    def string(self, what: str) -> str:
        return self.take("string", what).value

    def keyword(self, kw: str) -> None:
        tok = self.peek()
        if tok is None or tok.kind != "word" or tok.value != kw:
            found = "end of statement" if tok is None else repr(tok.text)
            raise self.fail(f"{self.head.value}: expected '{kw}', found {found}")
        self.pos += 1

    def clauses(self, arity: dict[str, str]) -> dict[str, list[Token]]:
        """Parse trailing ``keyword value`` / ``keyword value...`` clauses in any order."""
        found: dict[str, list[Token]] = {}
        while (tok := self.peek()) is not None:
            if tok.kind != "word" or tok.value not in arity:
                raise self.fail(f"{self.head.value}: unexpected {tok.text!r}")
            if tok.value in found:
                raise self.fail(f"{self.head.value}: clause '{tok.value}' given twice")
            self.pos += 1
            if arity[tok.value] == "one":
                found[tok.value] = [self.word(f"value for '{tok.value}'")]
            else:
                values = []
                while (nxt := self.peek()) is not None and not (nxt.kind == "word" and nxt.value in arity):
                    values.append(self.word(f"value for '{tok.value}'"))
                found[tok.value] = values
        return found

    def done(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise self.fail(f"{self.head.value}: unexpected trailing {tok.text!r}")


class _Builder:
    def __init__(self, file: str) -> None:
        self.file = file
        self.system: list[tuple[str, SourceSpan]] = []
        self.items: dict[str, list] = defaultdict(list)

    # -- value helpers -----------------------------------------------------

    def enum(self, cls, tok: Token, what: str):
        try:
            return cls(tok.value)
        except ValueError:
            choices = "|".join(m.value for m in cls)
            raise _StatementError("R-SYN-02", f"unknown {what} {tok.value!r} (expected {choices})", tok.span(self.file))

    def ident(self, tok: Token, prefix: str) -> str:
        if id_prefix(tok.value) != prefix:
            raise _StatementError(
                "R-SYN-02", f"malformed identifier {tok.value!r} (expected {prefix}-<n>)", tok.span(self.file)
            )
        return tok.value

    def code(self, tok: Token) -> str:
        if not SUBJECT_RE.match(tok.value):
            raise _StatementError("R-SYN-02", f"malformed subject code {tok.value!r}", tok.span(self.file))
        return tok.value

    def label(self, tok: Token, *kinds: LabelKind) -> Label:
        try:
            label = parse_label(tok.value)
        except LabelError as exc:
            raise _StatementError(exc.code, exc.message, tok.span(self.file, min(exc.offset, len(tok.text) - 1)))
        if kinds and label.kind not in kinds:
            wanted = " or ".join(k.value for k in kinds)
            raise _StatementError(
                "R-LABEL-04", f"{tok.value} has label kind {label.kind.value}, expected {wanted}", tok.span(self.file)
            )
        return label

    def endpoint(self, tok: Token):
        if tok.kind == "ext":
            return External(tok.value)
        if tok.kind != "word":
            raise _StatementError("R-SYN-01", f"expected function label or ext:\"name\", found {tok.text!r}", tok.span(self.file))
        return self.label(tok, LabelKind.FUNCTION)

    # -- statements --------------------------------------------------------

    def stmt_system(self, c: _Cursor, span: SourceSpan) -> None:
        name = c.string("system name")
        c.done()
        self.system.append((name, span))

    def stmt_subject(self, c: _Cursor, span: SourceSpan) -> None:
        code = self.code(c.word("subject code"))
        name = c.string("subject name")
        c.keyword("kind")
        kind = self.enum(SubjectKind, c.word("subject kind"), "subject kind")
        c.done()
        self.items["subjects"].append(Subject(code, name, kind, span=span))

    def stmt_loss(self, c: _Cursor, span: SourceSpan) -> None:
        ident = self.ident(c.word("loss id"), "L")
        text = c.string("loss description")
        c.keyword("category")
        category = self.enum(LossCategory, c.word("loss category"), "loss category")
        c.done()
        self.items["losses"].append(Loss(ident, text, category, span=span))

    def stmt_vulnerability(self, c: _Cursor, span: SourceSpan) -> None:
        ident = self.ident(c.word("vulnerability id"), "V")
        text = c.string("vulnerability description")
        clauses = c.clauses({"attribute": "one", "losses": "many"})
        attribute = None
        if "attribute" in clauses:
            attribute = self.enum(SecurityAttribute, clauses["attribute"][0], "security attribute")
        losses = tuple(self.ident(t, "L") for t in clauses.get("losses", ()))
        self.items["vulnerabilities"].append(Vulnerability(ident, text, attribute, losses, span=span))

    def stmt_constraint(self, c: _Cursor, span: SourceSpan) -> None:
        ident = self.ident(c.word("constraint id"), "SC")
        text = c.string("constraint description")
        clauses = c.clauses({"addresses": "many"})
        addresses = tuple(self.ident(t, "V") for t in clauses.get("addresses", ()))
        self.items["constraints"].append(SystemConstraint(ident, text, addresses, span=span))

    def stmt_function(self, c: _Cursor, span: SourceSpan) -> None:
        label = self.label(c.word("function label"), LabelKind.FUNCTION)
        name = c.string("function name")
        c.done()
        self.items["functions"].append(Function(label, name, span=span))

    def stmt_dataflow(self, c: _Cursor, span: SourceSpan) -> None:
        ident = self.ident(c.word("data flow id"), "DF")
        c.keyword("from")
        source = self.endpoint(c.any("source endpoint"))
        c.keyword("to")
        sink = self.endpoint(c.any("sink endpoint"))
        payload = c.string("payload")
        c.done()
        self.items["dataflows"].append(DataFlow(ident, source, sink, payload, span=span))

    def stmt_controller(self, c: _Cursor, span: SourceSpan) -> None:
        code = self.code(c.word("controller code"))
        tok = c.peek()
        name = c.string("controller name") if tok is not None and tok.kind == "string" else ""
        c.done()
        self.items["controllers"].append(Controller(code, name, span=span))

    def stmt_control_action(self, c: _Cursor, span: SourceSpan) -> None:
        label = self.label(c.word("control action label"), LabelKind.CONTROL_ACTION)
        name = c.string("control action name")
        c.keyword("from")
        controller = self.code(c.word("controller code"))
        c.keyword("to")
        controlled = self.code(c.word("controlled subject code"))
        clauses = c.clauses({"functions": "many"})
        functions = tuple(self.label(t, LabelKind.FUNCTION) for t in clauses.get("functions", ()))
        self.items["control_actions"].append(
            ControlAction(label, name, controller, controlled, functions, span=span)
        )

    def stmt_feedback(self, c: _Cursor, span: SourceSpan) -> None:
        ident = self.ident(c.word("feedback id"), "FB")
        c.keyword("from")
        source = self.code(c.word("subject code"))
        c.keyword("to")
        sink = self.code(c.word("subject code"))
        payload = c.string("payload")
        c.done()
        self.items["feedback"].append(Feedback(ident, source, sink, payload, span=span))

    def _finding(self, kind: FindingKind, c: _Cursor, span: SourceSpan) -> None:
        label = self.label(c.word("finding label"), kind.label_kind)
        c.keyword("guideword")
        guide_word = self.enum(GuideWord, c.word("guide word"), "guide word")
        text = c.string("finding description")
        clauses = c.clauses({"vulnerabilities": "many"})
        vulns = tuple(self.ident(t, "V") for t in clauses.get("vulnerabilities", ()))
        self.items["findings"].append(Finding(kind, label, guide_word, text, vulns, span=span))

    def stmt_ifb(self, c: _Cursor, span: SourceSpan) -> None:
        self._finding(FindingKind.IFB, c, span)

    def stmt_ls(self, c: _Cursor, span: SourceSpan) -> None:
        self._finding(FindingKind.DF_LS, c, span)

    def stmt_ica(self, c: _Cursor, span: SourceSpan) -> None:
        self._finding(FindingKind.ICA, c, span)

    def stmt_sls(self, c: _Cursor, span: SourceSpan) -> None:
        self._finding(FindingKind.SEC_LS, c, span)

    def stmt_map(self, c: _Cursor, span: SourceSpan) -> None:
        sec = self.label(c.word("STPA-Sec loss scenario label"), LabelKind.SEC_LS)
        c.take("arrow", "'->'")
        df = self.label(c.word("data-flow loss scenario label"), LabelKind.DF_LS)
        c.done()
        self.items["mappings"].append(MappingEntry(sec, df, span=span))

    def stmt_na(self, c: _Cursor, span: SourceSpan) -> None:
        target = self.label(
            c.word("row label"), LabelKind.FUNCTION, LabelKind.IFB, LabelKind.CONTROL_ACTION, LabelKind.ICA
        )
        c.keyword("guideword")
        guide_word = self.enum(GuideWord, c.word("guide word"), "guide word")
        c.done()
        self.items["na_marks"].append(NaMark(target, guide_word, span=span))

    def stmt_compat(self, c: _Cursor, span: SourceSpan) -> None:
        sec = self.enum(GuideWord, c.word("STPA-Sec guide word"), "guide word")
        df = self.enum(GuideWord, c.word("data-flow guide word"), "guide word")
        level = self.enum(CompatLevel, c.word("compatibility level"), "compatibility level")
        c.done()
        self.items["compat"].append(CompatOverride(sec, df, level, span=span))

    def handler(self, keyword: str) -> Callable[[_Cursor, SourceSpan], None] | None:
        if keyword not in KEYWORDS:
            return None
        return getattr(self, f"stmt_{keyword}")

    def build(self) -> tuple[AnalysisModel, list[Diagnostic]]:
        diagnostics = []
        for name, span in self.system[1:]:
            diagnostics.append(Diagnostic.of("R-DUP-01", "system declared more than once", span))
        system = self.system[0][0] if self.system else ""
        return AnalysisModel(system=system, **{k: tuple(v) for k, v in self.items.items()}), diagnostics


KEYWORDS = (
    "system",
    "subject",
    "loss",
    "vulnerability",
    "constraint",
    "function",
    "dataflow",
    "controller",
    "control_action",
    "feedback",
    "ifb",
    "ls",
    "ica",
    "sls",
    "na",
    "map",
    "compat",
)


def read_model(source: str, file: str = "<input>") -> tuple[AnalysisModel, list[Diagnostic]]:
    """Syntax-level read.  Always returns a model built from the well-formed statements.

    No referential or traceability checks run here; see :func:`parse_model`.
    """
    diagnostics: list[Diagnostic] = []
    builder = _Builder(file)
    for tokens in _logical_statements(source, file, diagnostics):
        head = tokens[0]
        span = SourceSpan(file, head.line, head.column, len(head.text))
        handler = builder.handler(head.value) if head.kind == "word" else None
        if handler is None:
            diagnostics.append(Diagnostic.of("R-SYN-01", f"unknown statement keyword {head.text!r}", span))
            continue
        try:
            handler(_Cursor(tokens, file), span)
        except _StatementError as exc:
            diagnostics.append(Diagnostic.of(exc.rule, exc.message, exc.span))
    model, extra = builder.build()
    diagnostics.extend(extra)
    return model, diagnostics


def parse_model(source: str, file: str = "<input>") -> tuple[AnalysisModel | None, list[Diagnostic]]:
    """Read and fully check a model.

    Returns ``(model, diagnostics)``; the model is ``None`` when any
    diagnostic is an error.  Diagnostics are sorted by position.
    """
    from .traceability import check_closure, check_structure

    model, diagnostics = read_model(source, file)
    diagnostics = diagnostics + check_structure(model) + check_closure(model)
    diagnostics.sort(key=Diagnostic.sort_key)
    if has_errors(diagnostics):
        return None, diagnostics
    return model, diagnostics


# -- printing --------------------------------------------------------------


def _ids(values) -> str:
    return " ".join(str(v) for v in values)


def _endpoint(ep) -> str:
    if isinstance(ep, External):
        return f"ext:{_quote(ep.name)}"
    return render_label(ep)


_FINDING_KEYWORD = {
    FindingKind.IFB: "ifb",
    FindingKind.DF_LS: "ls",
    FindingKind.ICA: "ica",
    FindingKind.SEC_LS: "sls",
}


def print_model(m: AnalysisModel) -> str:
    blocks: list[list[str]] = []

    def section(lines: list[str]) -> None:
        if lines:
            blocks.append(lines)

    if m.system:
        section([f"system {_quote(m.system)}"])
    section([f"subject {s.code} {_quote(s.name)} kind {s.kind.value}" for s in m.subjects])
    section([f"loss {l.id} {_quote(l.description)} category {l.category.value}" for l in m.losses])

    lines = []
    for v in m.vulnerabilities:
        lines.append(f"vulnerability {v.id} {_quote(v.description)}")
        if v.attribute is not None:
            lines.append(f"  attribute {v.attribute.value}")
        if v.losses:
            lines.append(f"  losses {_ids(v.losses)}")
    section(lines)

    lines = []
    for sc in m.constraints:
        lines.append(f"constraint {sc.id} {_quote(sc.description)}")
        if sc.addresses:
            lines.append(f"  addresses {_ids(sc.addresses)}")
    section(lines)

    section([f"function {f.id} {_quote(f.name)}" for f in m.functions])
    section(
        [
            f"dataflow {d.id} from {_endpoint(d.source)} to {_endpoint(d.sink)} {_quote(d.payload)}"
            for d in m.dataflows
        ]
    )
    section([f"controller {c.code} {_quote(c.name)}" if c.name else f"controller {c.code}" for c in m.controllers])

    lines = []
    for ca in m.control_actions:
        lines.append(f"control_action {ca.id} {_quote(ca.name)} from {ca.controller} to {ca.controlled}")
        if ca.functions:
            lines.append(f"  functions {_ids(ca.functions)}")
    section(lines)

    section([f"feedback {fb.id} from {fb.source} to {fb.sink} {_quote(fb.payload)}" for fb in m.feedback])

    for kind, keyword in _FINDING_KEYWORD.items():
        lines = []
        for f in m.findings_of(kind):
            lines.append(f"{keyword} {f.id} guideword {f.guide_word.value} {_quote(f.description)}")
            if f.vulnerabilities:
                lines.append(f"  vulnerabilities {_ids(f.vulnerabilities)}")
        section(lines)

    section([f"na {n.target} guideword {n.guide_word.value}" for n in m.na_marks])
    section([f"map {e.sec_ls} -> {e.df_ls}" for e in m.mappings])
    section([f"compat {c.sec_guide_word.value} {c.df_guide_word.value} {c.level.value}" for c in m.compat])

    out = [HEADER]
    for block in blocks:
        out.append("")
        out.extend(block)
    return "\n".join(out) + "\n"


# -- lint ------------------------------------------------------------------


def _gap_diagnostics(what: str, indices: set[int], span) -> list[Diagnostic]:
    missing = sorted(set(range(1, max(indices) + 1)) - indices) if indices else []
    if not missing:
        return []
    listed = ", ".join(str(i) for i in missing)
    return [Diagnostic.of("R-NUM-01", f"{what}: index gap, missing {listed}", span)]


def lint(m: AnalysisModel) -> list[Diagnostic]:
    """Style findings only; never errors."""
    out: list[Diagnostic] = []

    for group in (m.losses, m.vulnerabilities, m.constraints, m.dataflows, m.feedback):
        by_prefix: dict[str, set[int]] = defaultdict(set)
        for item in group:
            prefix, index = id_key(item.id)
            by_prefix[prefix].add(index)
        for prefix, indices in sorted(by_prefix.items()):
            first = next(i for i in group if id_key(i.id)[0] == prefix)
            out += _gap_diagnostics(f"{prefix}-n identifiers", indices, first.span)

    # label indices are numbered per parent position, ignoring subjects
    labelled = [*m.functions, *m.control_actions, *m.findings]
    siblings: dict[tuple, set[int]] = defaultdict(set)
    spans: dict[tuple, object] = {}
    for item in labelled:
        segs = item.id.segments
        key = (segs[:-1], segs[-1][0])
        siblings[key].add(segs[-1][1])
        spans.setdefault(key, item.span)
    for key in sorted(siblings, key=lambda k: (len(k[0]), [(t.rank, i) for t, i in k[0]], k[1].rank)):
        parent, tag = key
        where = "_".join(f"{t.value}{i}" for t, i in parent)
        what = f"{tag.value} indices" + (f" under {where}" if where else "")
        out += _gap_diagnostics(what, siblings[key], spans[key])

    described = [
        *((s.code, s.name, s.span) for s in m.subjects),
        *((l.id, l.description, l.span) for l in m.losses),
        *((v.id, v.description, v.span) for v in m.vulnerabilities),
        *((c.id, c.description, c.span) for c in m.constraints),
        *((str(f.id), f.name, f.span) for f in m.functions),
        *((str(c.id), c.name, c.span) for c in m.control_actions),
        *((str(f.id), f.description, f.span) for f in m.findings),
    ]
    for ident, text, span in described:
        if not text.strip():
            out.append(Diagnostic.of("R-DESC-01", f"{ident} has no description", span))

    used: set[str] = set()
    for item in labelled:
        used.update(item.id.subjects)
    for ca in m.control_actions:
        used.update((ca.controller, ca.controlled))
        for fn in ca.functions:
            used.update(fn.subjects)
    for fb in m.feedback:
        used.update((fb.source, fb.sink))
    used.update(c.code for c in m.controllers)
    for s in m.subjects:
        if s.code not in used:
            out.append(Diagnostic.of("R-SUBJ-01", f"subject {s.code} is never used", s.span))

    referenced = {l for v in m.vulnerabilities for l in v.losses}
    for loss in m.losses:
        if loss.id not in referenced:
            out.append(Diagnostic.of("R-LOSS-01", f"{loss.id} is not referenced by any vulnerability", loss.span))
    return out
