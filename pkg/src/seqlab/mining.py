"""Stage-1 template mining: frequent constrained sequential patterns.

A pattern P matches a symbol string S when there is a strictly increasing
index tuple m with S[m[i]] == P[i].  An optional gap constraint bounds the
number of symbols skipped between consecutive matched positions
(``max_gap=0`` means contiguous matching).  Support counts distinct
sequences containing at least one constraint-respecting match.

Mining uses prefix projection: each recursion level extends the current
prefix by one symbol, carrying per-sequence sets of feasible last-match
positions.  Tracking every feasible position (not just the leftmost) keeps
gap-constrained counting exact.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field

from .types import Dataset, SymbolString


@dataclass(frozen=True)
class MiningConstraints:
    """User-set bounds on mined patterns.

    ``max_gap`` is the maximum allowed index gap minus one between
    consecutive matched positions; ``None`` disables the constraint.
    """

    min_support: int = 1
    min_length: int = 1
    max_length: int = 6
    max_gap: int | None = None

    def __post_init__(self) -> None:
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if self.min_length < 1 or self.max_length < 1:
            raise ValueError("pattern length bounds must be >= 1")
        if self.min_length > self.max_length:
            raise ValueError("min_length must not exceed max_length")
        if self.max_gap is not None and self.max_gap < 0:
            raise ValueError("max_gap must be >= 0")


@dataclass(frozen=True)
class Pattern:
    """A mined sequential pattern and the number of sequences containing it."""

    symbols: SymbolString
    support: int


@dataclass(frozen=True)
class TemplateMetrics:
    """Per-template exploration metrics over the labeled/unlabeled coverage."""

    class_counts: dict[str, int]
    purity: float
    accuracy: float | None
    unlabeled_count: int
    newly_labeled_counts: dict[str, int]


def _feasible_positions(pattern: SymbolString, seq: SymbolString, max_gap: int | None) -> list[list[int]]:
    """For each pattern index, the match positions from which a full match can finish.

    Computed back to front; empty first level means no match exists.
    """
    feasible: list[list[int]] = [[] for _ in pattern]
    for i in range(len(pattern) - 1, -1, -1):
        nxt = feasible[i + 1] if i + 1 < len(pattern) else None
        for j, ch in enumerate(seq):
            if ch != pattern[i]:
                continue
            if nxt is None:
                feasible[i].append(j)
                continue
            hi = len(seq) if max_gap is None else j + max_gap + 1
            if any(j < q <= hi for q in nxt):
                feasible[i].append(j)
    return feasible


def leftmost_embedding(
    pattern: SymbolString, seq: SymbolString, max_gap: int | None = None
) -> tuple[int, ...] | None:
    """Lexicographically smallest witness (0-based positions), or None.

    The empty pattern matches everything with an empty witness.
    """
    if not pattern:
        return ()
    if max_gap is None:
        # Greedy scan is the leftmost witness when gaps are unconstrained.
        positions = []
        start = 0
        for ch in pattern:
            j = seq.find(ch, start)
            if j < 0:
                return None
            positions.append(j)
            start = j + 1
        return tuple(positions)
    feasible = _feasible_positions(pattern, seq, max_gap)
    if not feasible[0]:
        return None
    witness = [feasible[0][0]]
    for i in range(1, len(pattern)):
        prev = witness[-1]
        hi = prev + max_gap + 1
        nxt = next((q for q in feasible[i] if prev < q <= hi), None)
        if nxt is None:  # unreachable: feasibility guarantees a successor
            return None
        witness.append(nxt)
    return tuple(witness)


def is_subsequence(
    pattern: SymbolString, seq: SymbolString, max_gap: int | None = None
) -> bool:
    return leftmost_embedding(pattern, seq, max_gap) is not None


def all_embeddings(
    pattern: SymbolString, seq: SymbolString, max_gap: int | None = None
) -> Iterator[tuple[int, ...]]:
    """Every witness tuple, in lexicographic order.  Exponential; test-scale only."""

    def extend(i: int, prev: int) -> Iterator[tuple[int, ...]]:
        if i == len(pattern):
            yield ()
            return
        hi = len(seq) if max_gap is None or i == 0 else prev + max_gap + 1
        for j in range(prev + 1, min(hi, len(seq) - 1) + 1):
            if seq[j] == pattern[i]:
                for rest in extend(i + 1, j):
                    yield (j, *rest)

    yield from extend(0, -1)


def _mine_indexed(
    strings: list[SymbolString], constraints: MiningConstraints
) -> dict[SymbolString, frozenset[int]]:
    """Map each frequent pattern to the set of supporting string indices."""
    c = constraints
    results: dict[SymbolString, frozenset[int]] = {}

    def record_and_extend(prefix: SymbolString, occ: list[tuple[int, tuple[int, ...]]]) -> None:
        if len(prefix) >= c.min_length:
            results[prefix] = frozenset(i for i, _ in occ)
        if len(prefix) >= c.max_length:
            return
        by_symbol: dict[str, list[tuple[int, tuple[int, ...]]]] = defaultdict(list)
        for i, positions in occ:
            s = strings[i]
            next_positions: dict[str, set[int]] = defaultdict(set)
            for p in positions:
                hi = len(s) if c.max_gap is None else min(len(s), p + c.max_gap + 2)
                for q in range(p + 1, hi):
                    next_positions[s[q]].add(q)
            for ch, qs in next_positions.items():
                by_symbol[ch].append((i, tuple(sorted(qs))))
        for ch in sorted(by_symbol):
            entries = by_symbol[ch]
            if len(entries) >= c.min_support:
                record_and_extend(prefix + ch, entries)

    base: dict[str, list[tuple[int, tuple[int, ...]]]] = defaultdict(list)
    for i, s in enumerate(strings):
        positions: dict[str, list[int]] = defaultdict(list)
        for p, ch in enumerate(s):
            positions[ch].append(p)
        for ch, ps in positions.items():
            base[ch].append((i, tuple(ps)))
    for ch in sorted(base):
        entries = base[ch]
        if len(entries) >= c.min_support:
            record_and_extend(ch, entries)
    return results


def mine(dataset: Dataset, constraints: MiningConstraints) -> list[Pattern]:
    """All frequent patterns, sorted by (length, symbols).  Deterministic."""
    if not dataset.sequences:
        raise ValueError("cannot mine an empty dataset")
    strings = list(dataset.symbol_map().values())
    indexed = _mine_indexed(strings, constraints)
    return [
        Pattern(symbols=sym, support=len(idxs))
        for sym, idxs in sorted(indexed.items(), key=lambda kv: (len(kv[0]), kv[0]))
    ]


def mine_coverage(
    dataset: Dataset, constraints: MiningConstraints
) -> dict[SymbolString, frozenset[str]]:
    """Like mine(), but mapping each pattern to the covering video ids."""
    symbol_map = dataset.symbol_map()
    ids = list(symbol_map)
    indexed = _mine_indexed(list(symbol_map.values()), constraints)
    return {
        sym: frozenset(ids[i] for i in idxs)
        for sym, idxs in sorted(indexed.items(), key=lambda kv: (len(kv[0]), kv[0]))
    }


def matching_ids(
    dataset: Dataset, symbols: SymbolString, constraints: MiningConstraints | None = None
) -> list[str]:
    """Video ids whose symbol string contains ``symbols``, in ingestion order."""
    max_gap = constraints.max_gap if constraints else None
    return [
        vid
        for vid, s in dataset.symbol_map().items()
        if is_subsequence(symbols, s, max_gap)
    ]


def covered(
    dataset: Dataset,
    pattern: Pattern | SymbolString,
    constraints: MiningConstraints | None = None,
    labels: Mapping[str, str] | None = None,
) -> tuple[list[str], list[str]]:
    """Partition the pattern's matching video ids into (labeled, unlabeled).

    ``labels`` is the current label view (seed labels when omitted).
    """
    symbols = pattern.symbols if isinstance(pattern, Pattern) else pattern
    current = labels if labels is not None else dataset.seed_labels
    labeled, unlabeled = [], []
    for vid in matching_ids(dataset, symbols, constraints):
        (labeled if vid in current else unlabeled).append(vid)
    return labeled, unlabeled


def template_metrics(
    dataset: Dataset,
    pattern: Pattern | SymbolString,
    labels: Mapping[str, str] | None = None,
    predictions: Mapping[str, str] | None = None,
    constraints: MiningConstraints | None = None,
    newly_labeled: Mapping[str, str] | None = None,
    covered_ids: Iterable[str] | None = None,
) -> TemplateMetrics:
    """Class distribution, purity, model accuracy and coverage for one template.

    ``newly_labeled`` maps ids labeled through programming (rather than seed
    data) to their class; it feeds the newly-labeled breakdown shown in the UI.
    Accuracy is None (undefined) without predictions or labeled coverage.
    ``covered_ids`` short-circuits the subsequence scan when the caller
    already knows the matching set (from a mining pass).
    """
    current = labels if labels is not None else dataset.seed_labels
    if covered_ids is None:
        labeled, unlabeled = covered(dataset, pattern, constraints, labels)
    else:
        members = set(covered_ids)
        labeled, unlabeled = [], []
        for vid in dataset.sequences:
            if vid in members:
                (labeled if vid in current else unlabeled).append(vid)
    class_counts = Counter(current[vid] for vid in labeled)
    total = sum(class_counts.values())
    purity = max(class_counts.values()) / total if total else 0.0
    accuracy: float | None = None
    if predictions is not None and labeled:
        scored = [vid for vid in labeled if vid in predictions]
        if scored:
            correct = sum(1 for vid in scored if predictions[vid] == current[vid])
            accuracy = correct / len(scored)
    new_counts = Counter(
        (newly_labeled or {})[vid] for vid in labeled if vid in (newly_labeled or {})
    )
    return TemplateMetrics(
        class_counts=dict(class_counts),
        purity=purity,
        accuracy=accuracy,
        unlabeled_count=len(unlabeled),
        newly_labeled_counts=dict(new_counts),
    )


@dataclass
class PrefixNode:
    """One node of the prefix aggregation tree.

    ``pattern`` is None for intermediate prefixes that were not themselves
    mined.  Children extend ``symbols`` by exactly one code.
    """

    symbols: SymbolString
    pattern: Pattern | None = None
    children: list["PrefixNode"] = field(default_factory=list)


def aggregate(
    templates: list[Pattern], mode: str
) -> list[PrefixNode] | dict[int, list[Pattern]] | dict[str, list[Pattern]]:
    """Group templates by prefix (trie), degree (length) or symbol multiset."""
    if mode == "prefix":
        nodes: dict[SymbolString, PrefixNode] = {}

        def node_for(symbols: SymbolString) -> PrefixNode:
            if symbols not in nodes:
                nodes[symbols] = PrefixNode(symbols=symbols)
                if len(symbols) > 1:
                    parent = node_for(symbols[:-1])
                    parent.children.append(nodes[symbols])
            return nodes[symbols]

        for p in sorted(templates, key=lambda p: p.symbols):
            node_for(p.symbols).pattern = p
        roots = [n for s, n in sorted(nodes.items()) if len(s) == 1]
        for n in nodes.values():
            n.children.sort(key=lambda c: c.symbols)
        return roots
    if mode == "degree":
        groups: dict[int, list[Pattern]] = defaultdict(list)
        for p in sorted(templates, key=lambda p: (len(p.symbols), p.symbols)):
            groups[len(p.symbols)].append(p)
        return dict(sorted(groups.items()))
    if mode == "set":
        by_set: dict[str, list[Pattern]] = defaultdict(list)
        for p in sorted(templates, key=lambda p: (len(p.symbols), p.symbols)):
            by_set["".join(sorted(p.symbols))].append(p)
        return dict(sorted(by_set.items()))
    raise ValueError(f"unknown aggregation mode {mode!r}")


def search_template(
    query: SymbolString,
    dataset: Dataset,
    constraints: MiningConstraints | None = None,
    labels: Mapping[str, str] | None = None,
    predictions: Mapping[str, str] | None = None,
    newly_labeled: Mapping[str, str] | None = None,
) -> tuple[Pattern, TemplateMetrics]:
    """Look up a hand-written template, ignoring the frequency threshold."""
    if not query:
        raise ValueError("empty template query")
    unknown = dataset.registry.unknown_symbols(query)
    if unknown:
        raise ValueError(f"query uses unregistered codes {unknown}")
    matches = matching_ids(dataset, query, constraints)
    pattern = Pattern(symbols=query, support=len(matches))
    metrics = template_metrics(
        dataset, pattern, labels, predictions, constraints, newly_labeled
    )
    return pattern, metrics
