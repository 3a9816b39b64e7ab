"""Cross-analysis mapping between control-action and data-flow loss scenarios.

A mapping ``SEC-LS -> DF-LS`` is structurally valid when the function the
DF-LS hangs off belongs to the function sequence of the control action the
SEC-LS hangs off.  Candidate ranking on top of that rule is a heuristic
driven by :class:`CompatibilityMatrix`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .diagnostics import Diagnostic
from .labels import Label, expand_merged
from .model import (
    GUIDE_WORDS,
    AnalysisModel,
    CompatLevel,
    Finding,
    FindingKind,
    GuideWord,
    MappingEntry,
)
from .traceability import control_action_of

NOT_IN_SEQUENCE = "function not in control-action sequence"

G = GuideWord

_DEFAULT_LEVELS = {
    (G.CONTROLLER, G.FUNCTION_ITSELF): CompatLevel.STRONG,
    (G.CONTROLLED_PROCESS, G.FUNCTION_ITSELF): CompatLevel.STRONG,
    (G.CONTROLLER, G.ENV_INPUTS): CompatLevel.PLAUSIBLE,
    (G.CONTROLLED_PROCESS, G.ENV_INPUTS): CompatLevel.PLAUSIBLE,
    (G.CONTROL_PATH, G.ENV_LINKS): CompatLevel.STRONG,
    (G.FEEDBACK_PATH, G.ENV_LINKS): CompatLevel.STRONG,
    (G.CONTROL_PATH, G.ENV_CALLING): CompatLevel.PLAUSIBLE,
    (G.FEEDBACK_PATH, G.ENV_CALLING): CompatLevel.PLAUSIBLE,
}

# ICA guide word -> the IFB guide word describing the same failure mode
PARENT_CORRESPONDENCE = {
    G.NOT_PROVIDING: G.NECV,
    G.PROVIDING: G.ECV,
    G.TIMING: G.TI,
}


class MappingError(ValueError):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class CompatibilityMatrix:
    levels: dict[tuple[GuideWord, GuideWord], CompatLevel]

    @classmethod
    def default(cls) -> CompatibilityMatrix:
        return cls(
            {
                (sec, df): _DEFAULT_LEVELS.get((sec, df), CompatLevel.INCOMPATIBLE)
                for sec in GUIDE_WORDS[FindingKind.SEC_LS]
                for df in GUIDE_WORDS[FindingKind.DF_LS]
            }
        )

    @classmethod
    def for_model(cls, m: AnalysisModel) -> CompatibilityMatrix:
        levels = dict(cls.default().levels)
        for override in m.compat:
            key = (override.sec_guide_word, override.df_guide_word)
            if key in levels:
                levels[key] = override.level
        return cls(levels)

    def level(self, sec: GuideWord, df: GuideWord) -> CompatLevel:
        return self.levels[(sec, df)]


@dataclass(frozen=True)
class MappingReport:
    valid: tuple[MappingEntry, ...]
    violations: tuple[tuple[MappingEntry, str], ...]
    unmapped_sec_ls: tuple[Label, ...]
    df_ls_without_preimage: tuple[Label, ...]
    fanin: dict[Label, int] = field(default_factory=dict)

    def fanin_of(self, label: Label | str) -> int:
        return next((n for k, n in self.fanin.items() if str(k) == str(label)), 0)

    def lines(self) -> list[str]:
        out = ["valid:"]
        out += [f"  {e.sec_ls} -> {e.df_ls}" for e in self.valid]
        out.append("violations:")
        out += [f"  {e.sec_ls} -> {e.df_ls}: {reason}" for e, reason in self.violations]
        out.append("unmapped_sec_ls:")
        out += [f"  {l}" for l in self.unmapped_sec_ls]
        out.append("df_ls_without_preimage:")
        out += [f"  {l}" for l in self.df_ls_without_preimage]
        out.append("fanin:")
        out += [f"  {l} {n}" for l, n in self.fanin.items()]
        return out


def _function_variants(m: AnalysisModel, ca) -> set[Label]:
    return {v for fn in ca.functions for v in expand_merged(fn)}


def _check(m: AnalysisModel, entry: MappingEntry) -> str | None:
    sec = m.resolve(entry.sec_ls)
    df = m.resolve(entry.df_ls)
    if not isinstance(sec, Finding) or sec.kind is not FindingKind.SEC_LS:
        return f"unknown STPA-Sec loss scenario {entry.sec_ls}"
    if not isinstance(df, Finding) or df.kind is not FindingKind.DF_LS:
        return f"unknown data-flow loss scenario {entry.df_ls}"
    ca = control_action_of(m, entry.sec_ls)
    if ca is None:
        return f"{entry.sec_ls} has no declared control action"
    if not ca.functions:
        raise MappingError("E-MAP-01", f"{ca.id} is referenced by a mapping but lists no functions")
    members = _function_variants(m, ca)
    if not any(v in members for v in expand_merged(entry.df_ls.root())):
        return NOT_IN_SEQUENCE
    return None


def validate_mappings(m: AnalysisModel) -> MappingReport:
    valid, violations = [], []
    for entry in m.mappings:
        reason = _check(m, entry)
        if reason is None:
            valid.append(entry)
        else:
            violations.append((entry, reason))

    mapped_sec = {id(m.resolve(e.sec_ls)) for e in valid}
    target_variants = {v for e in valid for v in expand_merged(e.df_ls)}
    unmapped = tuple(f.id for f in m.findings_of(FindingKind.SEC_LS) if id(f) not in mapped_sec)
    orphans = tuple(
        f.id
        for f in m.findings_of(FindingKind.DF_LS)
        if not any(v in target_variants for v in expand_merged(f.id))
    )
    counts = Counter(e.df_ls for e in valid)
    fanin = {label: counts[label] for label in sorted(counts)}
    return MappingReport(tuple(valid), tuple(violations), unmapped, orphans, fanin)


@dataclass(frozen=True)
class Candidate:
    df_ls: Label
    level: CompatLevel
    parent_match: bool
    # matrix level of the loss-scenario guide words alone, before any parent upgrade
    base_level: CompatLevel = CompatLevel.INCOMPATIBLE

    def sort_key(self) -> tuple:
        return (-self.level.rank, not self.parent_match, -self.base_level.rank, self.df_ls.sort_key())


@dataclass(frozen=True)
class Suggestions:
    candidates: dict[Label, tuple[Candidate, ...]]
    warnings: tuple[Diagnostic, ...] = ()

    def top(self, sec_ls: Label | str) -> Candidate | None:
        for label, ranked in self.candidates.items():
            if str(label) == str(sec_ls):
                return ranked[0] if ranked else None
        raise KeyError(sec_ls)

    def lines(self) -> list[str]:
        out = []
        for sec, ranked in self.candidates.items():
            out.append(f"{sec}:")
            if not ranked:
                out.append("  (no candidates)")
            for i, c in enumerate(ranked, start=1):
                tag = " parent-match" if c.parent_match else ""
                out.append(f"  {i}. {c.df_ls} {c.level.value}{tag}")
        return out


def pair_level(
    matrix: CompatibilityMatrix, sec: Finding, sec_parent: Finding, df: Finding, df_parent: Finding
) -> tuple[CompatLevel, bool]:
    """Level of a SEC-LS/DF-LS pairing and whether their IFB/ICA parents correspond.

    A pair whose parents describe the same failure mode (e.g. ``timing`` and
    ``TI``) is strong even when the loss-scenario guide words alone are not.
    """
    parent_match = PARENT_CORRESPONDENCE.get(sec_parent.guide_word) is df_parent.guide_word
    level = matrix.level(sec.guide_word, df.guide_word)
    if parent_match:
        level = CompatLevel.STRONG
    return level, parent_match


def suggest_mappings(m: AnalysisModel) -> Suggestions:
    """Rank DF-LS candidates for every SEC-LS without a valid mapping.  Advisory only."""
    matrix = CompatibilityMatrix.for_model(m)
    report = validate_mappings(m) if all(_safe_sequence(m, e) for e in m.mappings) else None
    unmapped = set(report.unmapped_sec_ls) if report else {f.id for f in m.findings_of(FindingKind.SEC_LS)}

    candidates: dict[Label, tuple[Candidate, ...]] = {}
    warnings = []
    for sec in m.findings_of(FindingKind.SEC_LS):
        if sec.id not in unmapped:
            continue
        ca = control_action_of(m, sec.id)
        sec_parent = m.resolve(sec.parent)
        if ca is None or sec_parent is None:
            continue
        if not ca.functions:
            candidates[sec.id] = ()
            warnings.append(
                Diagnostic.of("R-MAP-02", f"{sec.id}: {ca.id} lists no functions, nothing to suggest", sec.span)
            )
            continue
        members = _function_variants(m, ca)
        ranked = []
        for df in m.findings_of(FindingKind.DF_LS):
            df_parent = m.resolve(df.parent)
            if df_parent is None:
                continue
            subjects = tuple(s for s in df.id.subjects if df.id.root().with_subjects((s,)) in members)
            if not subjects:
                continue
            level, parent_match = pair_level(matrix, sec, sec_parent, df, df_parent)
            if level is CompatLevel.INCOMPATIBLE:
                continue
            base = matrix.level(sec.guide_word, df.guide_word)
            ranked.append(Candidate(df.id.with_subjects(subjects), level, parent_match, base))
        candidates[sec.id] = tuple(sorted(ranked, key=Candidate.sort_key))
    return Suggestions(candidates, tuple(warnings))


def _safe_sequence(m: AnalysisModel, entry: MappingEntry) -> bool:
    ca = control_action_of(m, entry.sec_ls)
    return ca is None or bool(ca.functions)


@dataclass(frozen=True)
class FanoutStats:
    max_fanin: int
    mean_fanin: float
    many_to_one: int


def fanout_stats(m: AnalysisModel) -> FanoutStats:
    """Fan-in of DF-LS targets over valid mappings only."""
    counts = list(validate_mappings(m).fanin.values())
    if not counts:
        return FanoutStats(0, 0.0, 0)
    return FanoutStats(max(counts), sum(counts) / len(counts), sum(1 for n in counts if n > 1))
