"""Encode, validate, scaffold and report STPA-Sec / data-flow security analyses."""

__version__ = "0.1.0"

from .diagnostics import RULES, Diagnostic, Severity, SourceSpan
from .dsl import lint, parse_model, print_model, read_model
from .elicitation import completeness, emit_worksheet, scaffold
from .labels import Label, LabelError, canonical_order, expand_merged, parse_label, render_label
from .mapping import fanout_stats, suggest_mappings, validate_mappings
from .model import AnalysisModel, FindingKind, GuideWord
from .reporting import render_control_dot, render_fis_dot, render_table
from .traceability import check_closure, coverage, stats
from .corpus import corpus_path, load_corpus

__all__ = [
    "RULES",
    "AnalysisModel",
    "Diagnostic",
    "FindingKind",
    "GuideWord",
    "Label",
    "LabelError",
    "Severity",
    "SourceSpan",
    "canonical_order",
    "check_closure",
    "completeness",
    "corpus_path",
    "coverage",
    "emit_worksheet",
    "expand_merged",
    "fanout_stats",
    "lint",
    "load_corpus",
    "parse_label",
    "parse_model",
    "print_model",
    "read_model",
    "render_control_dot",
    "render_fis_dot",
    "render_label",
    "render_table",
    "scaffold",
    "stats",
    "suggest_mappings",
    "validate_mappings",
]
