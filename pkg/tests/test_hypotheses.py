import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varbf import GroupStats
from varbf.errors import DomainError, ParseError, ValidationError
from varbf.hypotheses import (
    HypothesisSpec,
    collapse,
    format_hypothesis,
    order_mask,
    parse_hypothesis,
    permute_hypothesis,
    satisfies_order,
)


def test_mixed_expression():
    spec = parse_hypothesis("1=2>(3,4,5=6)>7", 7)
    assert spec.blocks == ((1, 2), (3,), (4,), (5, 6), (7,))
    assert spec.order == frozenset({(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)})


def test_unordered_and_null():
    spec = parse_hypothesis("1,2,3", 3)
    assert spec.blocks == ((1,), (2,), (3,)) and not spec.order
    assert parse_hypothesis("1=2=3", 3).is_null
    assert parse_hypothesis(" 3 < 1 = 2 ", 3) == parse_hypothesis("1=2>3", 3)


def test_sd_scale_reverses_relations():
    assert parse_hypothesis("1>2>3", 3, scale="sd") == parse_hypothesis("1<2<3", 3)


@pytest.mark.parametrize(
    "text,k,error,pos",
    [
        ("1>>2", 2, ParseError, 2),
        ("1 & 2", 2, ParseError, 2),
        ("(1,2", 2, ParseError, 4),
        ("0=1", 1, ParseError, 0),
        ("", 2, ParseError, 0),
    ],
)
def test_parse_errors_carry_position(text, k, error, pos):
    with pytest.raises(error) as info:
        parse_hypothesis(text, k)
    assert info.value.position == pos
    assert f"position {pos}" in str(info.value)


@pytest.mark.parametrize("text,k", [("1=2>1", 2), ("1,2", 3), ("1,2,4", 3), ("1>2", 1)])
def test_validation_errors(text, k):
    with pytest.raises(ValidationError):
        parse_hypothesis(text, k)


def test_cyclic_order_rejected():
    with pytest.raises(ValidationError):
        HypothesisSpec(2, ((1,), (2,)), frozenset({(0, 1), (1, 0)}))


def test_satisfies_order():
    spec = parse_hypothesis("1>2>3", 3)
    assert satisfies_order([0.5, 0.3, 0.2], spec)
    assert not satisfies_order([0.2, 0.3, 0.5], spec)
    free = parse_hypothesis("1,2,3", 3)
    assert satisfies_order([0.2, 0.3, 0.5], free)
    with pytest.raises(DomainError):
        satisfies_order([0.5, 0.5], spec)


def test_order_mask_with_blocks():
    spec = parse_hypothesis("(1,2)>3", 3)
    rho = np.array([[0.4, 0.35, 0.25], [0.5, 0.2, 0.3], [0.3, 0.4, 0.3]])
    assert order_mask(rho, spec).tolist() == [True, False, False]


def test_collapse_sums():
    stats = [GroupStats(5, 10.0), GroupStats(7, 14.0), GroupStats(3, 6.0)]
    pooled, reduced = collapse(stats, parse_hypothesis("1=2,3", 3))
    assert [(g.n, g.ss, g.pooled) for g in pooled] == [(12, 24.0, 2), (3, 6.0, 1)]
    assert reduced.k == 2 and reduced.blocks == ((1,), (2,))
    same, _ = collapse(stats, parse_hypothesis("1,2,3", 3))
    assert same == stats


def test_collapse_keeps_order():
    stats = [GroupStats(5, 1.0)] * 4
    _, reduced = collapse(stats, parse_hypothesis("1=2>3>4", 4))
    assert reduced.order == frozenset({(0, 1), (1, 2)})


def test_permutation():
    spec = parse_hypothesis("1>2=3", 3)
    assert permute_hypothesis(spec, [3, 1, 2]) == parse_hypothesis("3>1=2", 3)


@st.composite
def hypotheses(draw):
    k = draw(st.integers(1, 8))
    perm = draw(st.permutations(range(1, k + 1)))
    cuts = sorted(draw(st.sets(st.integers(1, max(k - 1, 1)), max_size=k - 1))) if k > 1 else []
    pieces, start = [], 0
    for c in cuts + [k]:
        if c > start:
            pieces.append(perm[start:c])
            start = c
    terms = []
    for piece in pieces:
        atoms, i = [], 0
        while i < len(piece):
            size = draw(st.integers(1, len(piece) - i))
            atoms.append("=".join(map(str, piece[i : i + size])))
            i += size
        text = ",".join(atoms)
        terms.append(f"({text})" if len(atoms) > 1 and len(pieces) > 1 else text)
    ops = [draw(st.sampled_from("<>")) for _ in terms[1:]]
    text = terms[0] + "".join(op + t for op, t in zip(ops, terms[1:]))
    return text, k


@settings(max_examples=200, deadline=None)
@given(hypotheses())
def test_format_parse_round_trip(case):
    text, k = case
    spec = parse_hypothesis(text, k)
    again = parse_hypothesis(format_hypothesis(spec), k)
    assert again == spec
    assert format_hypothesis(again) == format_hypothesis(spec)
