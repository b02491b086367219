"""Miner correctness against an independent path-enumeration oracle."""

from __future__ import annotations

import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqlab.mining import (
    MiningConstraints,
    Pattern,
    aggregate,
    all_embeddings,
    covered,
    is_subsequence,
    leftmost_embedding,
    matching_ids,
    mine,
    mine_coverage,
    search_template,
    template_metrics,
)

from conftest import dataset_from_strings


def constrained_subsequences(s: str, max_gap: int | None, max_length: int) -> set[str]:
    """All nonempty patterns matching ``s`` under the gap constraint.

    Enumerates every match path directly, so it shares no code with the
    miner's prefix projection.
    """
    found: set[str] = set()

    def extend(prefix: str, last: int) -> None:
        if prefix:
            found.add(prefix)
        if len(prefix) >= max_length:
            return
        hi = len(s) - 1 if max_gap is None else min(last + max_gap + 1, len(s) - 1)
        for j in range(last + 1, hi + 1):
            extend(prefix + s[j], j)

    for start in range(len(s)):
        extend(s[start], start)
    return found


def brute_force_mine(
    strings: list[str], constraints: MiningConstraints
) -> dict[str, int]:
    support: dict[str, int] = {}
    for s in strings:
        for pattern in constrained_subsequences(s, constraints.max_gap, constraints.max_length):
            if len(pattern) >= constraints.min_length:
                support[pattern] = support.get(pattern, 0) + 1
    return {p: n for p, n in support.items() if n >= constraints.min_support}


def random_corpus(rng: random.Random) -> list[str]:
    alphabet = string.ascii_uppercase[: rng.randint(1, 5)]
    return [
        "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
        for _ in range(rng.randint(1, 20))
    ]


def test_miner_matches_brute_force_on_random_corpora():
    rng = random.Random(20240817)
    for trial in range(200):
        strings = random_corpus(rng)
        constraints = MiningConstraints(
            min_support=rng.randint(2, 5),
            min_length=1,
            max_length=8,
            max_gap=rng.choice([None, 0, 1, 2]) if trial % 2 else None,
        )
        expected = brute_force_mine(strings, constraints)
        ids = [f"v{i}" for i in range(len(strings))]
        dataset = dataset_from_strings(
            {vid: s for vid, s in zip(ids, strings)}, extra_codes="A"
        )
        got = {p.symbols: p.support for p in mine(dataset, constraints)}
        assert got == expected, f"trial {trial}: {constraints}"


def test_witness_example_positions():
    # Pattern AD inside ABDCD: matches end at the two D positions; the
    # leftmost witness is returned.  Positions are 0-based.
    witnesses = list(all_embeddings("AD", "ABDCD"))
    assert witnesses == [(0, 2), (0, 4)]
    assert leftmost_embedding("AD", "ABDCD") == (0, 2)


def test_leftmost_embedding_respects_gap():
    # A-C with one symbol allowed between matches: A.B.C works at gap 1 but
    # not at gap 0.
    assert leftmost_embedding("AC", "ABC", max_gap=1) == (0, 2)
    assert leftmost_embedding("AC", "ABC", max_gap=0) is None
    assert leftmost_embedding("AC", "ACBC", max_gap=0) == (0, 1)


def test_max_gap_zero_means_contiguous():
    dataset = dataset_from_strings({"a": "XABY", "b": "XAYB", "c": "AB"})
    contiguous = MiningConstraints(min_support=2, min_length=2, max_length=2, max_gap=0)
    got = {p.symbols: p.support for p in mine(dataset, contiguous)}
    assert got["AB"] == 2  # the interleaved XAYB no longer counts
    relaxed = MiningConstraints(min_support=2, min_length=2, max_length=2, max_gap=1)
    got = {p.symbols: p.support for p in mine(dataset, relaxed)}
    assert got["AB"] == 3


def test_support_counts_distinct_sequences():
    # Repeats within one sequence count once.
    dataset = dataset_from_strings({"a": "AAAA", "b": "BA"})
    got = {p.symbols: p.support for p in mine(dataset, MiningConstraints(min_support=1))}
    assert got["A"] == 2
    assert got["AA"] == 1


def test_mine_rejects_empty_dataset():
    dataset = dataset_from_strings({})
    with pytest.raises(ValueError):
        mine(dataset, MiningConstraints())


def test_mine_coverage_and_matching_ids_agree():
    strings = {"a": "ABAB", "b": "BAB", "c": "BBA"}
    dataset = dataset_from_strings(strings)
    constraints = MiningConstraints(min_support=2, min_length=1, max_length=3)
    coverage = mine_coverage(dataset, constraints)
    for symbols, ids in coverage.items():
        assert sorted(ids) == matching_ids(dataset, symbols)
        assert len(ids) >= 2


def test_covered_splits_on_labels():
    dataset = dataset_from_strings(
        {"a": "AB", "b": "AB", "c": "AC"},
        class_ids=["x"],
        seed_labels={"a": "x"},
    )
    labeled, unlabeled = covered(dataset, "A")
    assert labeled == ["a"]
    assert unlabeled == ["b", "c"]


def test_template_metrics_counts_and_purity():
    dataset = dataset_from_strings(
        {"a": "AB", "b": "AB", "c": "ABC", "d": "AD"},
        class_ids=["x", "y"],
    )
    labels = {"a": "x", "b": "x", "c": "y"}
    metrics = template_metrics(dataset, "AB", labels=labels)
    assert metrics.class_counts == {"x": 2, "y": 1}
    assert metrics.purity == pytest.approx(2 / 3)
    assert metrics.unlabeled_count == 0
    assert metrics.accuracy is None
    scored = template_metrics(
        dataset, "AB", labels=labels, predictions={"a": "x", "b": "y", "c": "y"}
    )
    assert scored.accuracy == pytest.approx(2 / 3)


def test_template_metrics_covered_ids_short_circuit():
    dataset = dataset_from_strings({"a": "AB", "b": "AB", "c": "AC"}, class_ids=["x"])
    labels = {"a": "x"}
    direct = template_metrics(dataset, "AB", labels=labels)
    shortcut = template_metrics(dataset, "AB", labels=labels, covered_ids=["a", "b"])
    assert direct == shortcut


def test_aggregate_modes():
    patterns = [Pattern("AB", 3), Pattern("ABC", 2), Pattern("BA", 2), Pattern("A", 5)]
    roots = aggregate(patterns, "prefix")
    assert [r.symbols for r in roots] == ["A", "B"]
    a_root = roots[0]
    assert a_root.pattern == Pattern("A", 5)
    assert [c.symbols for c in a_root.children] == ["AB"]
    assert [c.symbols for c in a_root.children[0].children] == ["ABC"]
    by_degree = aggregate(patterns, "degree")
    assert sorted(by_degree) == [1, 2, 3]
    assert [p.symbols for p in by_degree[2]] == ["AB", "BA"]
    by_set = aggregate(patterns, "set")
    assert [p.symbols for p in by_set["AB"]] == ["AB", "BA"]
    with pytest.raises(ValueError):
        aggregate(patterns, "nope")


def test_search_template_ignores_frequency():
    dataset = dataset_from_strings({"a": "ABC", "b": "BC"})
    pattern, metrics = search_template("ABC", dataset)
    assert pattern == Pattern("ABC", 1)
    assert metrics.unlabeled_count == 1
    with pytest.raises(ValueError):
        search_template("AZ", dataset)
    with pytest.raises(ValueError):
        search_template("", dataset)


@settings(max_examples=200, deadline=None)
@given(
    pattern=st.text(alphabet="ABC", min_size=1, max_size=4),
    seq=st.text(alphabet="ABC", max_size=10),
    max_gap=st.one_of(st.none(), st.integers(min_value=0, max_value=3)),
)
def test_leftmost_is_first_of_all_embeddings(pattern, seq, max_gap):
    witnesses = list(all_embeddings(pattern, seq, max_gap))
    leftmost = leftmost_embedding(pattern, seq, max_gap)
    if witnesses:
        assert leftmost == witnesses[0]
        assert witnesses == sorted(witnesses)
        assert is_subsequence(pattern, seq, max_gap)
    else:
        assert leftmost is None
        assert not is_subsequence(pattern, seq, max_gap)


@settings(max_examples=100, deadline=None)
@given(
    pattern=st.text(alphabet="AB", min_size=1, max_size=4),
    seq=st.text(alphabet="AB", max_size=10),
    max_gap=st.one_of(st.none(), st.integers(min_value=0, max_value=2)),
)
def test_witness_positions_are_valid(pattern, seq, max_gap):
    witness = leftmost_embedding(pattern, seq, max_gap)
    if witness is None:
        return
    assert len(witness) == len(pattern)
    for i, pos in enumerate(witness):
        assert seq[pos] == pattern[i]
        if i:
            assert pos > witness[i - 1]
            if max_gap is not None:
                assert pos - witness[i - 1] - 1 <= max_gap
