"""Command-line entry point.

Exit codes: 0 ok, 1 validation errors, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence, TextIO

from . import __version__
from .diagnostics import REGISTRY_VERSION, Diagnostic, Severity, has_errors
from .dsl import lint, parse_model
from .elicitation import ElicitationError, emit_worksheet, scaffold
from .mapping import MappingError, suggest_mappings, validate_mappings
from .model import AnalysisModel, FindingKind
from .reporting import TableKind, render_control_dot, render_fis_dot, render_table
from .traceability import stats

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_IO = 3

_KINDS = {"ifb": FindingKind.IFB, "dfls": FindingKind.DF_LS, "ica": FindingKind.ICA, "secls": FindingKind.SEC_LS}
_TABLES = {
    "purpose": TableKind.PURPOSE,
    "ifb": TableKind.IFB,
    "df_ls": TableKind.DF_LS,
    "dfls": TableKind.DF_LS,
    "ica": TableKind.ICA,
    "sec_ls": TableKind.SEC_LS,
    "secls": TableKind.SEC_LS,
    "mapping": TableKind.MAPPING,
}
_FORMATS = {"md": "markdown", "markdown": "markdown", "csv": "csv"}
_COLORS = {Severity.ERROR: "\033[31m", Severity.WARNING: "\033[33m", Severity.LINT: "\033[36m"}


def version_info() -> str:
    return f"stpasec {__version__} (rule registry {REGISTRY_VERSION})\n"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stpasec", description="Validate, scaffold and report security analysis models.")
    parser.add_argument("--version", action="store_true", help="print tool and rule-registry version")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("file")
        p.add_argument("--out", help="write results to this path instead of standard output")
        return p

    p = command("validate", "check a model and report diagnostics")
    p.add_argument("--lint", action="store_true", help="also report style lints")
    p = command("scaffold", "emit a guide-word worksheet")
    p.add_argument("--kind", required=True, choices=sorted(_KINDS))
    p.add_argument("--format", default="md", choices=sorted(_FORMATS))
    p = command("report", "render a report table")
    p.add_argument("--table", required=True, choices=sorted(_TABLES))
    p.add_argument("--format", default="md", choices=sorted(_FORMATS))
    p = command("map", "check declared loss-scenario mappings")
    p.add_argument("--suggest", action="store_true", help="rank candidates for unmapped scenarios")
    p = command("diagram", "emit a Graphviz DOT diagram")
    p.add_argument("--view", required=True, choices=["fis", "control"])
    command("stats", "count model entities")
    return parser


def _use_color(stream: TextIO) -> bool:
    mode = os.environ.get("STPA_COLOR", "auto")
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _report(diagnostics: list[Diagnostic], file: str, stream: TextIO) -> None:
    color = _use_color(stream)
    for d in diagnostics:
        line = d.format(file)
        if color:
            line = f"{_COLORS[d.severity]}{line}\033[0m"
        print(line, file=stream)


def _load(path: str, stderr: TextIO) -> tuple[AnalysisModel | None, list[Diagnostic]]:
    with open(path, encoding="utf-8") as fh:
        source = fh.read()
    model, diagnostics = parse_model(source, path)
    _report(diagnostics, path, stderr)
    return model, diagnostics


def _execute(args: argparse.Namespace, stderr: TextIO) -> tuple[int, str]:
    model, diagnostics = _load(args.file, stderr)
    if args.command == "validate":
        if model is not None and args.lint:
            lints = lint(model)
            _report(lints, args.file, stderr)
        errors = sum(d.is_error for d in diagnostics)
        warnings = sum(d.severity is Severity.WARNING for d in diagnostics)
        summary = f"{args.file}: {errors} error(s), {warnings} warning(s)\n"
        return (EXIT_INVALID if has_errors(diagnostics) else EXIT_OK), summary
    if model is None:
        return EXIT_INVALID, ""

    if args.command == "scaffold":
        sheet = scaffold(model, _KINDS[args.kind])
        return EXIT_OK, emit_worksheet(sheet, _FORMATS[args.format])
    if args.command == "report":
        return EXIT_OK, render_table(model, _TABLES[args.table], _FORMATS[args.format])
    if args.command == "map":
        lines = validate_mappings(model).lines()
        if args.suggest:
            suggestions = suggest_mappings(model)
            _report(list(suggestions.warnings), args.file, stderr)
            lines += ["suggestions:", *("  " + line for line in suggestions.lines())]
        return EXIT_OK, "\n".join(lines) + "\n"
    if args.command == "diagram":
        render = render_fis_dot if args.view == "fis" else render_control_dot
        return EXIT_OK, render(model)
    if args.command == "stats":
        return EXIT_OK, "\n".join(stats(model).lines()) + "\n"
    raise AssertionError(args.command)


def run(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(parser.format_usage().rstrip(), file=stderr)
        print(exc, file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    if args.version:
        stdout.write(version_info())
        return EXIT_OK
    if args.command is None:
        print(parser.format_usage().rstrip(), file=stderr)
        return EXIT_USAGE

    try:
        code, text = _execute(args, stderr)
        if text:
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            else:
                stdout.write(text)
    except OSError as exc:
        print(f"stpasec: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=stderr)
        return EXIT_IO
    except UnicodeDecodeError as exc:
        print(f"stpasec: {args.file}: not UTF-8 text ({exc.reason})", file=stderr)
        return EXIT_IO
    except (ElicitationError, MappingError) as exc:
        print(f"stpasec: {exc}", file=stderr)
        return EXIT_INVALID
    return code


def main() -> None:
    sys.exit(run())
