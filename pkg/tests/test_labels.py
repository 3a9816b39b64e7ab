from __future__ import annotations

import functools
import random

import pytest

from stpasec.labels import (
    ILLEGAL_CHAIN,
    MALFORMED,
    MISSING_SUBJECT,
    LabelError,
    LabelKind,
    Tag,
    canonical_order,
    expand_merged,
    parse_label,
    render_label,
)

LEGAL_CHAINS = [
    ("F",),
    ("F", "IFB"),
    ("F", "IFB", "LS"),
    ("CA",),
    ("CA", "ICA"),
    ("CA", "ICA", "LS"),
]


def random_label_text(rng: random.Random) -> str:
    subjects = rng.sample(["P", "S", "D", "U", "M", "Ecu2", "gw"], rng.randint(1, 4))
    chain = rng.choice(LEGAL_CHAINS)
    segments = "".join(f"_{tag}{rng.randint(1, 120)}" for tag in chain)
    return "/".join(subjects) + segments


def test_parse_merged_ifb_label():
    label = parse_label("P/S/D_F2_IFB1")
    assert label.subjects == ("P", "S", "D")
    assert label.segments == ((Tag.F, 2), (Tag.IFB, 1))
    assert label.kind is LabelKind.IFB
    assert label.merged


def test_parse_sec_ls_label():
    label = parse_label("D_CA1_ICA3_LS2")
    assert label.kind is LabelKind.SEC_LS
    assert label.index == 2
    assert str(label.parent()) == "D_CA1_ICA3"
    assert str(label.root()) == "D_CA1"


def test_df_ls_and_sec_ls_share_tag_but_differ_in_kind():
    assert parse_label("U_F7_IFB2_LS1").kind is LabelKind.DF_LS
    assert parse_label("U_CA2_ICA1_LS1").kind is LabelKind.SEC_LS


@pytest.mark.parametrize(
    "text, code",
    [
        ("F2_IFB1", MISSING_SUBJECT),
        ("P_F2_ICA1", ILLEGAL_CHAIN),
        ("P_IFB1", ILLEGAL_CHAIN),
        ("P_CA1_IFB1", ILLEGAL_CHAIN),
        ("P_F2_IFB1_LS1_LS2", ILLEGAL_CHAIN),
        ("P_F0", MALFORMED),
        ("P_F01", MALFORMED),
        ("P__F1", MALFORMED),
        ("P/_F1", MISSING_SUBJECT),
        ("_F1", MISSING_SUBJECT),
        ("P_F1 ", MALFORMED),
        ("", MALFORMED),
        ("1P_F1", MALFORMED),
        ("P_X1", MALFORMED),
    ],
)
def test_rejects_bad_labels(text, code):
    with pytest.raises(LabelError) as info:
        parse_label(text)
    assert info.value.code == code


def test_duplicate_subject_in_merged_label_is_rejected():
    with pytest.raises(LabelError):
        parse_label("P/P_F1")


def test_round_trip_random_labels():
    rng = random.Random(7)
    for _ in range(1000):
        text = random_label_text(rng)
        label = parse_label(text)
        assert render_label(label) == text
        assert parse_label(render_label(label)) == label


def test_parse_is_injective_on_canonical_forms():
    rng = random.Random(11)
    texts = {random_label_text(rng) for _ in range(600)}
    assert len({parse_label(t) for t in texts}) == len(texts)


def test_expand_merged_examples():
    assert [str(l) for l in expand_merged(parse_label("P/S/D_F2_IFB1"))] == ["P_F2_IFB1", "S_F2_IFB1", "D_F2_IFB1"]
    assert [str(l) for l in expand_merged(parse_label("U_F7_IFB2"))] == ["U_F7_IFB2"]
    assert len(expand_merged(parse_label("U/M_F7_IFB1"))) == 2


def test_expand_preserves_chain_and_multiplicity():
    rng = random.Random(3)
    for _ in range(300):
        label = parse_label(random_label_text(rng))
        variants = expand_merged(label)
        assert len(variants) == len(label.subjects)
        assert all(v.segments == label.segments and len(v.subjects) == 1 for v in variants)


def test_canonical_order_examples():
    assert canonical_order(parse_label("P_F1"), parse_label("P_F2")) < 0
    assert canonical_order(parse_label("P_F2"), parse_label("P_F2_IFB1")) < 0
    assert canonical_order(parse_label("D_CA1_ICA1"), parse_label("D_CA1_ICA2")) < 0
    assert canonical_order(parse_label("P_F10"), parse_label("P_F9")) > 0
    assert canonical_order(parse_label("P_F3"), parse_label("P_F3")) == 0


def test_canonical_order_is_a_total_order():
    rng = random.Random(5)
    labels = [parse_label(random_label_text(rng)) for _ in range(150)]
    for a in labels[:40]:
        for b in labels[:40]:
            assert canonical_order(a, b) == -canonical_order(b, a)
            assert (canonical_order(a, b) == 0) == (a == b)
    ordered = sorted(labels, key=functools.cmp_to_key(canonical_order))
    assert all(canonical_order(x, y) <= 0 for x, y in zip(ordered, ordered[1:]))
    assert ordered == sorted(labels)
