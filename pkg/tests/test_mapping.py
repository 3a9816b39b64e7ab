from __future__ import annotations

import re

import pytest

from modelgen import random_source
from stpasec.dsl import parse_model, read_model
from stpasec.labels import expand_merged, parse_label
from stpasec.mapping import (
    NOT_IN_SEQUENCE,
    CompatibilityMatrix,
    MappingError,
    fanout_stats,
    suggest_mappings,
    validate_mappings,
)
from stpasec.model import CompatLevel, FindingKind, GuideWord

# default heuristic, restated independently: (SEC-LS gw, DF-LS gw) -> level
ORACLE_MATRIX = {
    ("controller", "function_itself"): "strong",
    ("controlled_process", "function_itself"): "strong",
    ("controller", "env_inputs"): "plausible",
    ("controlled_process", "env_inputs"): "plausible",
    ("control_path", "env_links"): "strong",
    ("feedback_path", "env_links"): "strong",
    ("control_path", "env_calling"): "plausible",
    ("feedback_path", "env_calling"): "plausible",
}
ORACLE_PARENTS = {"not_providing": "NECV", "providing": "ECV", "timing": "TI"}


def variants(text: str) -> set[str]:
    subjects, rest = text.split("_", 1)
    return {f"{s}_{rest}" for s in subjects.split("/")}


def function_variants_of(label: str) -> set[str]:
    return variants(re.match(r"[^_]+_F[0-9]+", label).group(0))


def stripped(source: str) -> str:
    return "".join(line + "\n" for line in source.splitlines() if not line.startswith("map "))


def brute_force(model):
    """Every membership-satisfying (SEC-LS, DF-LS) pair with its oracle level."""
    cas = {str(ca.id): ca for ca in model.control_actions}
    matrix = dict(ORACLE_MATRIX)
    matrix.update({(c.sec_guide_word.value, c.df_guide_word.value): c.level.value for c in model.compat})
    out = {}
    for sec in model.findings_of(FindingKind.SEC_LS):
        ca = next(c for key, c in cas.items() if variants(str(sec.id).split("_ICA")[0]) <= variants(key))
        members = set().union(*(variants(str(fn)) for fn in ca.functions)) if ca.functions else set()
        sec_parent = next(f for f in model.findings_of(FindingKind.ICA) if variants(str(sec.id.parent())) <= variants(str(f.id)))
        for df in model.findings_of(FindingKind.DF_LS):
            if not function_variants_of(str(df.id)) & members:
                continue
            df_parent = next(f for f in model.findings_of(FindingKind.IFB) if variants(str(df.id.parent())) <= variants(str(f.id)))
            level = matrix.get((sec.guide_word.value, df.guide_word.value), "incompatible")
            if ORACLE_PARENTS[sec_parent.guide_word.value] == df_parent.guide_word.value:
                level = "strong"
            out[(str(sec.id), str(df.id))] = level
    return out


def test_default_matrix_is_total_and_matches_oracle():
    matrix = CompatibilityMatrix.default()
    assert len(matrix.levels) == 4 * 5
    for (sec, df), level in matrix.levels.items():
        assert level.value == ORACLE_MATRIX.get((sec.value, df.value), "incompatible")


def test_compat_override_applies(corpus_text):
    model, _ = parse_model(corpus_text + "compat controller env_links plausible\n")
    matrix = CompatibilityMatrix.for_model(model)
    assert matrix.level(GuideWord.CONTROLLER, GuideWord.ENV_LINKS) is CompatLevel.PLAUSIBLE
    assert CompatibilityMatrix.default().level(GuideWord.CONTROLLER, GuideWord.ENV_LINKS) is CompatLevel.INCOMPATIBLE


def test_corpus_mappings_are_valid(corpus):
    report = validate_mappings(corpus)
    assert report.violations == ()
    assert [str(e.sec_ls) for e in report.valid] == [
        "D_CA1_ICA3_LS1",
        "D_CA1_ICA3_LS2",
        "D_CA1_ICA3_LS3",
        "U_CA2_ICA1_LS1",
        "U_CA2_ICA1_LS2",
    ]
    assert report.unmapped_sec_ls == ()
    assert "P/S/D_F2_IFB3_LS3" in {str(l) for l in report.df_ls_without_preimage}
    assert report.fanin_of("P/S/D_F2_IFB3_LS1") == 2
    assert report.fanin_of("U_F7_IFB2_LS1") == 2


def test_every_declared_entry_lands_in_exactly_one_bucket():
    for seed in range(150):
        model, _ = parse_model(random_source(seed))
        report = validate_mappings(model)
        assert len(report.valid) + len(report.violations) == len(model.mappings)


def test_validity_matches_membership_oracle():
    checked = 0
    for seed in range(300):
        model, _ = parse_model(random_source(seed))
        report = validate_mappings(model)
        for entry in model.mappings:
            ca_label = str(entry.sec_ls).split("_ICA")[0]
            ca = next(c for c in model.control_actions if variants(ca_label) <= variants(str(c.id)))
            members = set().union(*(variants(str(fn)) for fn in ca.functions))
            expected = bool(function_variants_of(str(entry.df_ls)) & members)
            assert (entry in report.valid) == expected
            checked += 1
    assert checked > 100


def test_function_outside_sequence_is_a_violation():
    source = (
        'subject P "p" kind technical\nloss L-1 "l" category life\n'
        'vulnerability V-1 "v" attribute integrity losses L-1\nconstraint SC-1 "c" addresses V-1\n'
        'function P_F1 "a"\nfunction P_F9 "b"\ncontroller P\n'
        'control_action P_CA1 "act" from P to P functions P_F1\n'
        'ifb P_F9_IFB1 guideword TI "x" vulnerabilities V-1\nls P_F9_IFB1_LS1 guideword env_links "y"\n'
        'ica P_CA1_ICA1 guideword timing "z" vulnerabilities V-1\nsls P_CA1_ICA1_LS1 guideword control_path "w"\n'
        "map P_CA1_ICA1_LS1 -> P_F9_IFB1_LS1\n"
    )
    model, diagnostics = parse_model(source)
    assert diagnostics == []
    report = validate_mappings(model)
    assert report.valid == ()
    ((entry, reason),) = report.violations
    assert reason == NOT_IN_SEQUENCE == "function not in control-action sequence"
    assert fanout_stats(model).max_fanin == 0


def test_merged_membership_uses_any_variant():
    source = (
        'subject P "p" kind technical\nsubject S "s" kind technical\nloss L-1 "l" category life\n'
        'vulnerability V-1 "v" attribute integrity losses L-1\nconstraint SC-1 "c" addresses V-1\n'
        'function P/S_F1 "a"\ncontroller P\n'
        'control_action P_CA1 "act" from P to S functions S_F1\n'
        'ifb P/S_F1_IFB1 guideword TI "x" vulnerabilities V-1\nls P/S_F1_IFB1_LS1 guideword env_links "y"\n'
        'ica P_CA1_ICA1 guideword timing "z" vulnerabilities V-1\nsls P_CA1_ICA1_LS1 guideword control_path "w"\n'
        "map P_CA1_ICA1_LS1 -> P/S_F1_IFB1_LS1\n"
    )
    model, _ = parse_model(source)
    assert len(validate_mappings(model).valid) == 1


def test_empty_sequence_is_rejected():
    source = (
        'subject P "p" kind technical\nloss L-1 "l" category life\n'
        'vulnerability V-1 "v" attribute integrity losses L-1\nconstraint SC-1 "c" addresses V-1\n'
        'function P_F1 "a"\ncontroller P\ncontrol_action P_CA1 "act" from P to P\n'
        'ifb P_F1_IFB1 guideword TI "x" vulnerabilities V-1\nls P_F1_IFB1_LS1 guideword env_links "y"\n'
        'ica P_CA1_ICA1 guideword timing "z" vulnerabilities V-1\nsls P_CA1_ICA1_LS1 guideword control_path "w"\n'
    )
    model, diagnostics = parse_model(source + "map P_CA1_ICA1_LS1 -> P_F1_IFB1_LS1\n")
    assert model is None and [d.rule for d in diagnostics] == ["E-MAP-01"]

    raw, _ = read_model(source + "map P_CA1_ICA1_LS1 -> P_F1_IFB1_LS1\n")
    with pytest.raises(MappingError) as info:
        validate_mappings(raw)
    assert info.value.code == "E-MAP-01"

    model, _ = parse_model(source)
    suggestions = suggest_mappings(model)
    assert suggestions.candidates[parse_label("P_CA1_ICA1_LS1")] == ()
    assert [d.rule for d in suggestions.warnings] == ["R-MAP-02"]


def test_suggestions_rank_reference_pairs_first(corpus_text):
    model, _ = parse_model(stripped(corpus_text))
    suggestions = suggest_mappings(model)
    assert str(suggestions.top("D_CA1_ICA3_LS1").df_ls) == "P/S/D_F2_IFB3_LS1"
    assert str(suggestions.top("D_CA1_ICA3_LS3").df_ls) == "P/S/D_F2_IFB3_LS1"
    assert str(suggestions.top("U_CA2_ICA1_LS1").df_ls) == "U_F7_IFB2_LS1"
    assert str(suggestions.top("U_CA2_ICA1_LS2").df_ls) == "U_F7_IFB2_LS1"


def test_link_slowdown_gets_env_links_strong(corpus_text):
    model, _ = parse_model(stripped(corpus_text))
    ranked = suggest_mappings(model).candidates[parse_label("D_CA1_ICA3_LS2")]
    links = [c for c in ranked if str(c.df_ls) == "P/S/D_F2_IFB3_LS4"]
    assert links and links[0].level is CompatLevel.STRONG


def _resolved(model, label):
    return str(model.resolve(label).id)


@pytest.mark.parametrize("source_seed", [None, *range(120)])
def test_suggestions_agree_with_brute_force(corpus_text, source_seed):
    source = stripped(corpus_text) if source_seed is None else random_source(source_seed)
    model, _ = parse_model(source)
    if not model.findings_of(FindingKind.SEC_LS):
        return
    oracle = brute_force(model)
    report = validate_mappings(model)
    suggestions = suggest_mappings(model)
    unmapped = {str(l) for l in report.unmapped_sec_ls}
    assert {str(k) for k in suggestions.candidates} <= unmapped
    for sec, ranked in suggestions.candidates.items():
        got = {_resolved(model, c.df_ls): c.level.value for c in ranked}
        want = {df: lvl for (s, df), lvl in oracle.items() if s == str(sec) and lvl != "incompatible"}
        assert got == want, sec
        ranks = [c.level.rank for c in ranked]
        assert ranks == sorted(ranks, reverse=True)
        for c in ranked:
            assert expand_merged(c.df_ls)  # every candidate is a well-formed label
    assert suggest_mappings(model) == suggestions


def test_suggestions_do_not_mutate_the_model(corpus_text):
    model, _ = parse_model(stripped(corpus_text))
    before = model
    suggest_mappings(model)
    assert model == before and model.mappings == ()


def test_fanout_stats(corpus):
    stats = fanout_stats(corpus)
    assert stats.max_fanin == 2
    assert stats.many_to_one == 2
    assert stats.mean_fanin == pytest.approx(5 / 3)


def test_fanout_without_mappings_is_zero(corpus_text):
    model, _ = parse_model(stripped(corpus_text))
    stats = fanout_stats(model)
    assert (stats.max_fanin, stats.mean_fanin, stats.many_to_one) == (0, 0.0, 0)
