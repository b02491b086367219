"""Stage-2 refinement: description-length clustering of a template's matches.

Each cluster is summarized by a representative symbol string (its medoid)
that must itself contain the seed template.  The objective being minimized is

    total_dl = sum(len(representative)) + alpha * sum(edit costs) + lambda * #clusters

where an edit cost is the Levenshtein distance between a member and its
cluster representative.  Clustering is greedy agglomerative from singletons:
each round applies the merge that lowers total_dl the most, stopping when no
merge helps.  An optional minhash-LSH pre-bucketing restricts which pairs may
merge; it trades summary quality for speed and never affects correctness of
the bookkeeping.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .mining import is_subsequence, leftmost_embedding
from .types import EventSequence, SymbolString, symbol_string

# Event roles relative to a cluster: matched to the seed template, matched to
# the representative only, or unmatched.
CORE = "core"
FOCUS = "focus"
CONTEXT = "context"

# (kind, source_position, symbol); symbol is None for deletions.
EditOp = tuple[str, int, str | None]


@dataclass(frozen=True)
class EditScript:
    """Ops transforming a source string into a target, in left-to-right order."""

    ops: tuple[EditOp, ...]

    @property
    def cost(self) -> int:
        return len(self.ops)


def edit_cost(a: SymbolString, b: SymbolString) -> int:
    """Levenshtein distance with unit costs; no script materialized."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def edit_alignment(
    a: SymbolString, b: SymbolString
) -> tuple[int, EditScript, tuple[tuple[int, int], ...]]:
    """Optimal alignment of ``a`` onto ``b``: (cost, script, matched index pairs).

    Backtrace tie-break prefers match > replace > delete > insert, which keeps
    scripts and role assignments deterministic.
    """
    m, n = len(a), len(b)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dp[i][0] = i
    for j in range(1, n + 1):
        dp[0][j] = j
    for i in range(1, m + 1):
        row, prev_row = dp[i], dp[i - 1]
        ca = a[i - 1]
        for j in range(1, n + 1):
            row[j] = min(prev_row[j] + 1, row[j - 1] + 1, prev_row[j - 1] + (ca != b[j - 1]))
    ops: list[EditOp] = []
    matches: list[tuple[int, int]] = []
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            matches.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            ops.append(("replace", i - 1, b[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            ops.append(("delete", i - 1, None))
            i -= 1
        else:
            ops.append(("insert", i, b[j - 1]))
            j -= 1
    ops.reverse()
    matches.reverse()
    return dp[m][n], EditScript(ops=tuple(ops)), tuple(matches)


def edit_distance(a: SymbolString, b: SymbolString) -> tuple[int, EditScript]:
    """Levenshtein distance and one optimal script from ``a`` to ``b``."""
    cost, script, _ = edit_alignment(a, b)
    return cost, script


def apply_edits(source: SymbolString, script: EditScript) -> SymbolString:
    """Replay a script against its source; reproduces the aligned target."""
    out = list(source)
    offset = 0
    for kind, pos, symbol in script.ops:
        if kind == "replace":
            out[pos + offset] = symbol  # type: ignore[assignment]
        elif kind == "delete":
            del out[pos + offset]
            offset -= 1
        elif kind == "insert":
            out.insert(pos + offset, symbol)  # type: ignore[arg-type]
            offset += 1
        else:
            raise ValueError(f"unknown edit op {kind!r}")
    return "".join(out)


@dataclass(frozen=True)
class Cluster:
    """One cluster: a representative containing the seed, plus member scripts."""

    representative: SymbolString
    seed_template: SymbolString
    members: tuple[tuple[str, EditScript], ...]

    @property
    def member_ids(self) -> tuple[str, ...]:
        return tuple(vid for vid, _ in self.members)

    @property
    def edit_costs(self) -> tuple[int, ...]:
        return tuple(script.cost for _, script in self.members)


@dataclass(frozen=True)
class ClusterPartition:
    clusters: tuple[Cluster, ...]
    alpha: float
    lam: float
    total_dl: float


def description_length(partition: ClusterPartition) -> float:
    """Recompute the objective from the partition's parts."""
    dl = 0.0
    for cluster in partition.clusters:
        dl += len(cluster.representative)
        dl += partition.alpha * sum(cluster.edit_costs)
    dl += partition.lam * len(partition.clusters)
    return dl


@dataclass(frozen=True)
class BandParams:
    """Minhash-LSH parameters: n-gram shingles, banded signatures."""

    num_hashes: int = 32
    bands: int = 8
    shingle: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_hashes % self.bands:
            raise ValueError("num_hashes must be a multiple of bands")
        if self.shingle < 1:
            raise ValueError("shingle size must be >= 1")


def _shingles(s: SymbolString, k: int) -> frozenset[str]:
    if len(s) <= k:
        return frozenset({s})
    return frozenset(s[i : i + k] for i in range(len(s) - k + 1))


_MERSENNE = (1 << 61) - 1


def lsh_buckets(
    sequences: Sequence[tuple[str, SymbolString]], params: BandParams
) -> dict[int, list[str]]:
    """Group sequences into candidate-merge buckets.

    Sequences sharing any signature band land in the same bucket (buckets are
    the connected components of band collisions), so identical strings always
    bucket together and strings with disjoint shingle sets never do.
    """
    ids = [vid for vid, _ in sequences]
    shingle_sets = [_shingles(s, params.shingle) for _, s in sequences]
    vocab = {sh: i for i, sh in enumerate(sorted(set().union(*shingle_sets) if shingle_sets else set()))}
    rng = np.random.default_rng(params.seed)
    coeffs = [
        (int(rng.integers(1, _MERSENNE)), int(rng.integers(0, _MERSENNE)))
        for _ in range(params.num_hashes)
    ]

    parent = list(range(len(ids)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: int, y: int) -> None:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    rows = params.num_hashes // params.bands
    seen: dict[tuple, int] = {}
    for idx, shingle_set in enumerate(shingle_sets):
        values = [vocab[sh] for sh in shingle_set]
        signature = [min((a * v + b) % _MERSENNE for v in values) for a, b in coeffs]
        for band in range(params.bands):
            key = (band, tuple(signature[band * rows : (band + 1) * rows]))
            if key in seen:
                union(seen[key], idx)
            else:
                seen[key] = idx
    buckets: dict[int, list[str]] = {}
    for idx in range(len(ids)):
        buckets.setdefault(find(idx), []).append(ids[idx])
    return {i: buckets[root] for i, root in enumerate(sorted(buckets))}


def _pairwise_distances(strings: list[SymbolString]) -> np.ndarray:
    """Symmetric Levenshtein matrix; duplicates share one computation."""
    unique = sorted(set(strings))
    pos = {s: i for i, s in enumerate(unique)}
    u = len(unique)
    base = np.zeros((u, u), dtype=float)
    for i in range(u):
        for j in range(i + 1, u):
            base[i, j] = base[j, i] = edit_cost(unique[i], unique[j])
    idx = np.array([pos[s] for s in strings])
    return base[np.ix_(idx, idx)]


def cluster(
    sequences: Sequence[tuple[str, SymbolString]],
    seed_template: SymbolString,
    alpha: float = 0.8,
    lam: float = 0.0,
    lsh: BandParams | None = None,
) -> ClusterPartition:
    """Partition sequences that share ``seed_template`` into summary clusters.

    Every input must contain the seed template as a subsequence, which makes
    the medoid rule safe: representatives are members, so they contain the
    seed by construction.
    """
    missing = [vid for vid, s in sequences if not is_subsequence(seed_template, s)]
    if missing:
        raise ValueError(f"sequences missing seed template {seed_template!r}: {missing}")
    ids = [vid for vid, _ in sequences]
    strings = [s for _, s in sequences]
    n = len(ids)
    if n == 0:
        return ClusterPartition(clusters=(), alpha=alpha, lam=lam, total_dl=lam * 0.0)

    dist = _pairwise_distances(strings)
    lengths = np.array([len(s) for s in strings], dtype=float)

    component: list[int] | None = None
    if lsh is not None:
        buckets = lsh_buckets(sequences, lsh)
        by_id = {vid: b for b, vids in buckets.items() for vid in vids}
        component = [by_id[vid] for vid in ids]

    def medoid(members: list[int], sums: np.ndarray) -> int:
        # Lowest summed distance wins; ties break on (string, id) for determinism.
        return min(members, key=lambda m: (sums[m], strings[m], ids[m]))

    def cluster_dl(members: list[int], sums: np.ndarray) -> tuple[float, int]:
        med = medoid(members, sums)
        return lengths[med] + alpha * sums[med], med

    # State per live cluster: member indices and the vector of distances from
    # every point to the cluster's members (so merge costs are one argmin).
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    sums: dict[int, np.ndarray] = {i: dist[:, i].copy() for i in range(n)}
    dls: dict[int, float] = {}
    for i in range(n):
        dls[i], _ = cluster_dl(members[i], sums[i])

    def merge_delta(a: int, b: int) -> tuple[float, tuple]:
        merged_sums = sums[a] + sums[b]
        merged_members = members[a] + members[b]
        dl_merged, med = cluster_dl(merged_members, merged_sums)
        delta = dl_merged - dls[a] - dls[b] - lam
        rep_a = strings[medoid(members[a], sums[a])]
        rep_b = strings[medoid(members[b], sums[b])]
        tie = tuple(sorted((rep_a, rep_b))) + tuple(
            sorted((min(ids[m] for m in members[a]), min(ids[m] for m in members[b])))
        )
        return delta, tie

    candidates: dict[tuple[int, int], tuple[float, tuple]] = {}
    live = sorted(members)
    for x in range(len(live)):
        for y in range(x + 1, len(live)):
            a, b = live[x], live[y]
            if component is not None and component[a] != component[b]:
                continue
            candidates[(a, b)] = merge_delta(a, b)

    while candidates:
        (a, b), (delta, _) = min(candidates.items(), key=lambda kv: (kv[1][0], kv[1][1]))
        if delta >= 0:
            break
        members[a] = members[a] + members[b]
        sums[a] = sums[a] + sums[b]
        dls[a], _ = cluster_dl(members[a], sums[a])
        del members[b], sums[b], dls[b]
        candidates = {
            pair: val for pair, val in candidates.items() if b not in pair and a not in pair
        }
        for other in members:
            if other == a:
                continue
            if component is not None and component[other] != component[a]:
                continue
            pair = (min(a, other), max(a, other))
            candidates[pair] = merge_delta(*pair)

    def build(groups: list[list[int]]) -> ClusterPartition:
        clusters = []
        for group in groups:
            group_sums = np.zeros(n)
            for m in group:
                group_sums += dist[:, m]
            med = medoid(group, group_sums)
            rep = strings[med]
            member_entries = tuple(
                (ids[m], edit_distance(rep, strings[m])[1]) for m in sorted(group)
            )
            clusters.append(
                Cluster(representative=rep, seed_template=seed_template, members=member_entries)
            )
        clusters.sort(key=lambda c: (c.representative, c.member_ids))
        partition = ClusterPartition(
            clusters=tuple(clusters), alpha=alpha, lam=lam, total_dl=0.0
        )
        return ClusterPartition(
            clusters=partition.clusters,
            alpha=alpha,
            lam=lam,
            total_dl=description_length(partition),
        )

    greedy = build(list(members.values()))
    single = build([list(range(n))])
    # Greedy starts at the all-singletons bound; enforce the single-cluster
    # bound explicitly in case the merge path stalled in a local optimum.
    return single if single.total_dl < greedy.total_dl else greedy


def assign_roles(member: EventSequence, cluster_: Cluster) -> list[str]:
    """Role per event of ``member``: core, focus, or context.

    Core events align (exact match) to representative positions matched by
    the leftmost embedding of the seed template; focus events align to other
    representative positions; everything else is context.
    """
    if member.video_id not in cluster_.member_ids:
        raise ValueError(f"{member.video_id!r} is not a member of this cluster")
    rep = cluster_.representative
    target = symbol_string(member)
    seed_positions = set(leftmost_embedding(cluster_.seed_template, rep) or ())
    _, _, matches = edit_alignment(rep, target)
    by_target = {t: s for s, t in matches}
    roles = []
    for i in range(len(target)):
        if i not in by_target:
            roles.append(CONTEXT)
        elif by_target[i] in seed_positions:
            roles.append(CORE)
        else:
            roles.append(FOCUS)
    return roles
