from __future__ import annotations

import io
import re
import subprocess
import sys

import pytest

from stpasec import __version__
from stpasec.cli import run
from stpasec.diagnostics import REGISTRY_VERSION


def invoke(*argv: str) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def broken_source(corpus_text: str) -> str:
    """The corpus with L-2 deleted; only V-1 still points at it."""
    text = re.sub(r"(?m)^loss L-2 .*\n", "", corpus_text)
    text = text.replace("  losses L-2\n", "  losses L-1\n")
    text = text.replace('"Leak sensitive information."\n  attribute confidentiality\n  losses L-1 L-2\n',
                        '"Leak sensitive information."\n  attribute confidentiality\n  losses L-1\n')
    return text


@pytest.fixture
def broken_file(tmp_path, corpus_text):
    path = tmp_path / "broken.stpa"
    path.write_text(broken_source(corpus_text), encoding="utf-8")
    return path


def test_validate_corpus(corpus_file):
    code, out, err = invoke("validate", str(corpus_file))
    assert code == 0
    assert err == ""
    assert out == f"{corpus_file}: 0 error(s), 0 warning(s)\n"


def test_validate_broken(broken_file):
    code, out, err = invoke("validate", str(broken_file))
    assert code == 1
    lines = err.splitlines()
    assert len(lines) == 1
    assert re.fullmatch(rf"{re.escape(str(broken_file))}:\d+:\d+ R1 error V-1 references unknown loss L-2", lines[0])
    assert out.endswith(": 1 error(s), 0 warning(s)\n")


def test_validate_lint_flag(tmp_path):
    path = tmp_path / "gap.stpa"
    path.write_text(
        'loss L-1 "a" category life\nloss L-3 "b" category life\n'
        'vulnerability V-1 "v" attribute integrity losses L-1 L-3\nconstraint SC-1 "c" addresses V-1\n',
        encoding="utf-8",
    )
    assert invoke("validate", str(path))[2] == ""
    code, _, err = invoke("validate", "--lint", str(path))
    assert code == 0
    assert " R-NUM-01 lint " in err


def test_map_reports_orphans(corpus_file):
    code, out, _ = invoke("map", str(corpus_file))
    assert code == 0
    section = out.split("df_ls_without_preimage:\n")[1].split("fanin:")[0]
    assert "  P/S/D_F2_IFB3_LS3\n" in section
    assert "unmapped_sec_ls:\ndf_ls_without_preimage:" in out
    assert "  P/S/D_F2_IFB3_LS1 2\n" in out and "  U_F7_IFB2_LS1 2\n" in out


def test_map_suggest(tmp_path, corpus_text):
    path = tmp_path / "nomap.stpa"
    path.write_text("".join(l + "\n" for l in corpus_text.splitlines() if not l.startswith("map ")), encoding="utf-8")
    code, out, _ = invoke("map", "--suggest", str(path))
    assert code == 0
    block = out.split("U_CA2_ICA1_LS1:\n")[1]
    assert block.splitlines()[0].startswith("    1. U_F7_IFB2_LS1 strong")


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["scaffold", "--kind", "ifb"], "| U/M_F7: human operation | / | U/M_F7_IFB1, U/M_F7_IFB2 | / |"),
        (["scaffold", "--kind", "dfls", "--format", "csv"], "P/S/D_F2_IFB3,P/S/D_F2_IFB3_LS1,P/S/D_F2_IFB3_LS2,,"),
        (["report", "--table", "purpose"], "V-3: Leak sensitive information. [L-1/2, Confidentiality]"),
        (["report", "--table", "secls"], "| U_CA2_ICA1 | / | / | U_CA2_ICA1_LS1 | U_CA2_ICA1_LS2 |"),
        (["diagram", "--view", "control"], '"U" -> "P" [style=solid, label="U_CA2 Lock or unlock doors"];'),
        (["diagram", "--view", "fis"], '"P_F2" -> "S_F2"'),
        (["stats"], "vulnerabilities=3"),
    ],
)
def test_subcommand_output(corpus_file, argv, expected):
    code, out, _ = invoke(argv[0], str(corpus_file), *argv[1:])
    assert code == 0
    assert expected in out


def test_out_redirects(tmp_path, corpus_file):
    target = tmp_path / "stats.txt"
    code, out, _ = invoke("stats", str(corpus_file), "--out", str(target))
    assert code == 0 and out == ""
    assert "losses=2\n" in target.read_text(encoding="utf-8")


def test_version():
    code, out, _ = invoke("--version")
    assert code == 0
    assert out == f"stpasec {__version__} (rule registry {REGISTRY_VERSION})\n"
    assert out.count("\n") == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["validate", "--bogus", "x.stpa"],
        ["frobnicate", "x.stpa"],
        ["scaffold", "x.stpa"],
        ["scaffold", "x.stpa", "--kind", "nope"],
        ["validate"],
        [],
    ],
)
def test_usage_errors(argv):
    code, out, err = invoke(*argv)
    assert code == 2
    assert out == "" and "usage:" in err


def test_missing_file_is_io_error(tmp_path):
    code, _, err = invoke("validate", str(tmp_path / "absent.stpa"))
    assert code == 3 and err


def test_unwritable_out_is_io_error(tmp_path, corpus_file):
    code, _, _ = invoke("stats", str(corpus_file), "--out", str(tmp_path / "no" / "such" / "dir.txt"))
    assert code == 3


def test_non_utf8_is_io_error(tmp_path):
    path = tmp_path / "latin1.stpa"
    path.write_bytes('system "caf\xe9"\n'.encode("latin-1"))
    assert invoke("validate", str(path))[0] == 3


def test_invalid_model_blocks_other_commands(broken_file):
    for argv in (["stats"], ["report", "--table", "ifb"], ["map"], ["diagram", "--view", "fis"]):
        code, out, err = invoke(argv[0], str(broken_file), *argv[1:])
        assert code == 1 and out == "" and " R1 error " in err


def test_scaffold_without_parents_exits_invalid(tmp_path):
    path = tmp_path / "bare.stpa"
    path.write_text('subject P "p" kind technical\n', encoding="utf-8")
    code, _, err = invoke("scaffold", str(path), "--kind", "secls")
    assert code == 1 and "E-ELIC-01" in err


def test_color_modes(broken_file, monkeypatch):
    monkeypatch.setenv("STPA_COLOR", "always")
    assert "\033[31m" in invoke("validate", str(broken_file))[2]
    monkeypatch.setenv("STPA_COLOR", "never")
    assert "\033[" not in invoke("validate", str(broken_file))[2]


def test_module_entry_point(corpus_file):
    proc = subprocess.run(
        [sys.executable, "-m", "stpasec", "validate", str(corpus_file)], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
