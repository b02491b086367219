"""Labeling-efficiency simulation: template strategy vs. baselines.

A hidden oracle answers every label query with the true class; strategies
differ only in which videos they ask about.  The template strategy mines
patterns once (pattern coverage is label-independent), then each round
labels the top retrieved batch of the highest-purity template that still
covers unlabeled videos.  The uncertainty baseline labels the batch with
the highest predictive entropy; random labels a uniform batch.  After each
batch the classifier retrains and the macro-F1 on a held-out test split is
appended to the curve.
"""

from __future__ import annotations

import itertools
import string
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .mining import MiningConstraints, _mine_indexed
from .model import IterationRecord, TrainConfig, evaluate, feature_matrix, train
from .types import ClassInfo, Dataset, EventInstance, EventRegistry, EventSequence, EventType

STRATEGIES = ("template", "uncertainty", "random")

_PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
)


def _pattern_design(base: list[str], count: int) -> list[str]:
    """Greedy max-spread pattern set: admit permutations of the base multiset
    whose bigram overlap with every admitted pattern stays under a cap,
    escalating the cap only when a full pass admits nothing new."""

    def bigrams(s: str) -> set[str]:
        return {s[i : i + 2] for i in range(len(s) - 1)}

    chosen: list[str] = []
    for cap in range(1, max(len(base), 2)):
        seen: set[str] = set(chosen)
        scanned = 0
        for perm in itertools.permutations(base):
            candidate = "".join(perm)
            if candidate in seen:
                continue
            seen.add(candidate)
            scanned += 1
            if all(len(bigrams(candidate) & bigrams(p)) <= cap for p in chosen):
                chosen.append(candidate)
                if len(chosen) == count:
                    return chosen
            if scanned >= 20000:
                break
    raise ValueError(
        f"letter pool too small for {count} distinct patterns of length {len(base)}"
    )


def generate_synthetic(
    n_classes: int = 4,
    patterns_per_class: int = 3,
    noise: float = 0.2,
    n: int = 1000,
    seed: int = 0,
    pattern_length: int = 7,
    alphabet_size: int = 12,
    pattern_letters: int = 7,
    hard_fraction: float = 0.06,
    embedding_dim: int | None = 8,
    embedding_noise: float = 2.0,
    class_balance: float = 0.45,
) -> tuple[Dataset, dict[str, str]]:
    """Build a generative dataset plus its hidden oracle labels.

    Each class owns planted symbol patterns; a sequence is one planted
    pattern with noise events interleaved at the given rate.  Patterns draw
    from a shared letter pool (pattern_letters), so classes differ mainly in
    event ORDER rather than event counts, and the signal degrades as noise
    events break up adjacencies.  Class sizes follow a geometric taper
    (class_balance**c, 1.0 = uniform), matching the skew of real corpora.
    When noise > 0 a hard tail (hard_fraction) models ambiguous footage: a
    patchwork of pattern fragments from the most common classes, an
    embedding at their midpoint, and a ground-truth label drawn between the
    two dominant classes; noise=0 yields clean pattern-only sequences.
    """
    if n_classes < 2 or n < n_classes:
        raise ValueError("need >= 2 classes and at least one sequence per class")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise rate must be within [0, 1)")
    if patterns_per_class < 1 or pattern_length < 1:
        raise ValueError("patterns must be nonempty")
    if not 0.0 <= hard_fraction < 1.0:
        raise ValueError("hard_fraction must be within [0, 1)")
    if alphabet_size < 2 or alphabet_size > 26:
        raise ValueError("alphabet size must be within [2, 26]")
    if not 2 <= pattern_letters <= alphabet_size:
        raise ValueError("pattern_letters must be within [2, alphabet_size]")
    if not 0.0 < class_balance <= 1.0:
        raise ValueError("class_balance must be within (0, 1]")

    rng = np.random.default_rng(seed)
    letters = string.ascii_uppercase[:alphabet_size]
    pool = list(letters[:pattern_letters])
    # Patterns are permutations of one shared letter multiset: event COUNTS
    # carry no class signal, only event order does, so classifiers must
    # estimate order statistics through the noise instead of reading the
    # class off a histogram.  The design itself is deterministic (the seed
    # only shuffles which class owns which pattern), so dataset difficulty
    # stays level across seeds.
    base = [pool[i % pattern_letters] for i in range(pattern_length)]
    design = _pattern_design(base, n_classes * patterns_per_class)
    dealt = [design[int(i)] for i in rng.permutation(len(design))]
    patterns: dict[str, list[str]] = {
        f"c{c}": dealt[c * patterns_per_class : (c + 1) * patterns_per_class]
        for c in range(n_classes)
    }

    weights = np.array([class_balance**c for c in range(n_classes)])
    weights /= weights.sum()
    # Guarantee every class appears, then fill the rest by weighted draw.
    class_sequence = list(range(n_classes))
    class_sequence += [int(c) for c in rng.choice(n_classes, size=n - n_classes, p=weights)]

    # Class centroids sit on a regular simplex (equidistant pairs), so the
    # embedding difficulty does not swing with the seed.
    dim = embedding_dim or 0
    centroids = np.zeros((n_classes, max(dim, 1)))
    if dim:
        span = min(n_classes, dim)
        simplex = np.zeros((n_classes, dim))
        for c in range(n_classes):
            simplex[c, c % span] = 1.0
        simplex -= simplex.mean(axis=0)
        norms = np.linalg.norm(simplex, axis=1, keepdims=True)
        centroids = simplex * (3.0 / np.maximum(norms, 1e-12))

    registry = EventRegistry(
        types=tuple(EventType(code=ch, name=f"event {ch}") for ch in letters)
    )
    classes = tuple(
        ClassInfo(class_id=f"c{c}", name=f"class {c}", color=_PALETTE[c % len(_PALETTE)])
        for c in range(n_classes)
    )

    sequences: dict[str, EventSequence] = {}
    embeddings: dict[str, list[float]] = {}
    oracle: dict[str, str] = {}
    width = len(str(n - 1))
    for i in range(n):
        class_idx = class_sequence[i]
        class_id = f"c{class_idx}"
        vid = f"v{i:0{width}d}"
        hard = bool(noise > 0.0 and rng.random() < hard_fraction)
        if hard:
            # Hard instances model ambiguous footage spanning the most common
            # classes: a patchwork of pattern fragments from each, an
            # embedding at their shared midpoint, and a ground-truth class
            # that is a coin flip between the two dominant ones (annotators
            # file ambiguous clips under a common class).  The tie is
            # irreducible, so they stay among the most uncertain instances in
            # the corpus no matter how many of them get labeled.
            blend = [f"c{k}" for k in range(min(3, n_classes))]
            class_id = str(rng.choice(blend[:2]))
            class_idx = int(class_id[1:])
            parts = [str(rng.choice(patterns[b])) for b in blend]
            order = [int(j) for j in rng.permutation(len(parts))]
            step = max(1, pattern_length // len(parts))
            symbols = []
            for slot, j in enumerate(order):
                lo = slot * step
                hi = lo + step if slot < len(parts) - 1 else pattern_length
                symbols.extend(parts[j][lo:hi])
            vec = centroids[[int(b[1:]) for b in blend]].mean(axis=0)
            if dim:
                vec = vec + rng.normal(size=dim) * embedding_noise
        else:
            pick = int(rng.integers(0, patterns_per_class))
            symbols = list(patterns[class_id][pick])
            vec = centroids[class_idx]
            if dim:
                vec = vec + rng.normal(size=dim) * embedding_noise
        if noise > 0.0:
            # Noise events are background codes outside the pattern pool when
            # the alphabet has room for them: they interrupt adjacencies
            # without counterfeiting another class's evidence, the way
            # irrelevant interface events interleave with real behavior.
            backdrop = list(letters[pattern_letters:]) or list(letters)
            p = min(noise / (1.0 - noise), 1.0)
            extra = int(rng.binomial(pattern_length, p))
            for _ in range(extra):
                pos = int(rng.integers(0, len(symbols) + 1))
                symbols.insert(pos, str(rng.choice(backdrop)))
        events = tuple(
            EventInstance(code=ch, t_start=float(j), t_end=float(j) + 0.8)
            for j, ch in enumerate(symbols)
        )
        sequences[vid] = EventSequence(
            video_id=vid, duration=float(len(symbols)), events=events
        )
        embeddings[vid] = [float(x) for x in vec]
        oracle[vid] = class_id
    dataset = Dataset(
        registry=registry,
        sequences=sequences,
        classes=classes,
        embeddings=embeddings if embedding_dim else None,
    )
    return dataset, oracle


@dataclass(frozen=True)
class SimulationConfig:
    strategy: str
    oracle: Mapping[str, str]
    target_f1: float = 0.85
    batch_size: int = 10
    max_labels: int = 600
    seed: int = 0
    initial_per_class: int = 2
    test_fraction: float = 0.3
    mining: MiningConstraints = field(
        default_factory=lambda: MiningConstraints(min_support=4, min_length=2, max_length=7)
    )
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=200, seed=0))

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0.0 < self.target_f1 <= 1.0:
            raise ValueError("target_f1 must be within (0, 1]")
        if self.batch_size < 1 or self.max_labels < 1:
            raise ValueError("batch_size and max_labels must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be within (0, 1)")


@dataclass(frozen=True)
class SimulationResult:
    strategy: str
    curve: tuple[tuple[int, float], ...]
    labels_to_target: int | None
    reached: bool
    records: tuple[IterationRecord, ...]

    @property
    def total_labels(self) -> int:
        return self.curve[-1][0] if self.curve else 0


def _entropy(probs: np.ndarray) -> np.ndarray:
    safe = np.clip(probs, 1e-12, 1.0)
    return -(safe * np.log(safe)).sum(axis=1)


def _template_batch(
    coverage: list[tuple[str, str, frozenset[str]]],
    labeled: Mapping[str, str],
    unlabeled: set[str],
    batch_size: int,
    per_template: int = 3,
) -> list[str]:
    """Assemble a batch by verifying several templates, a few members each,
    the way an annotator works through the template table between retrains:
    highest purity first, and within equal purity the template whose majority
    class currently has the fewest labels, so effort rotates across classes
    instead of drilling one group.
    """
    class_totals: dict[str, int] = {}
    for class_id in labeled.values():
        class_totals[class_id] = class_totals.get(class_id, 0) + 1

    scored: list[tuple[tuple[float, int, int, str], str | None, frozenset[str]]] = []
    for symbols, _, covered in coverage:
        open_ids = covered & unlabeled
        if not open_ids:
            continue
        class_counts: dict[str, int] = {}
        for vid in covered:
            if vid in labeled:
                class_counts[labeled[vid]] = class_counts.get(labeled[vid], 0) + 1
        if class_counts:
            top = max(class_counts.values())
            purity = top / sum(class_counts.values())
            majority: str | None = min(c for c, k in class_counts.items() if k == top)
            majority_total = class_totals.get(majority, 0)
        else:
            purity = 0.0
            majority = None
            majority_total = 0
        key = (-purity, majority_total, -len(open_ids), symbols)
        scored.append((key, majority, open_ids))
    scored.sort(key=lambda item: item[0])

    batch: list[str] = []
    chosen: set[str] = set()
    served: set[str | None] = set()
    while len(batch) < batch_size:
        progressed = False
        for _, majority, open_ids in scored:
            if len(batch) >= batch_size:
                break
            if majority in served:
                continue
            fresh = sorted(open_ids - chosen)
            if not fresh:
                continue
            take = fresh[: min(per_template, batch_size - len(batch))]
            batch.extend(take)
            chosen.update(take)
            served.add(majority)
            progressed = True
        if not progressed:
            break
        served.clear()
    return batch


def simulate(dataset: Dataset, config: SimulationConfig) -> SimulationResult:
    """Run one strategy until target F1, label budget, or pool exhaustion."""
    ids = list(dataset.sequences)
    missing = sorted(set(ids) - set(config.oracle))
    if missing:
        raise ValueError(f"oracle does not cover {missing[:5]} (and maybe more)")
    oracle = {vid: config.oracle[vid] for vid in ids}
    symbol_map = dataset.symbol_map()
    rng = np.random.default_rng(config.seed)

    shuffled = list(ids)
    rng.shuffle(shuffled)
    n_test = max(1, int(round(len(ids) * config.test_fraction)))
    test_ids = sorted(shuffled[:n_test])
    pool = shuffled[n_test:]

    labeled: dict[str, str] = {}
    for class_id in sorted({oracle[vid] for vid in pool}):
        members = [vid for vid in pool if oracle[vid] == class_id]
        for vid in members[: config.initial_per_class]:
            labeled[vid] = oracle[vid]
    unlabeled = {vid for vid in pool if vid not in labeled}

    coverage: list[tuple[str, str, frozenset[str]]] = []
    if config.strategy == "template":
        pool_index = {vid: i for i, vid in enumerate(sorted(pool))}
        strings = [symbol_map[vid] for vid in sorted(pool)]
        mined = _mine_indexed(strings, config.mining)
        inverse = {i: vid for vid, i in pool_index.items()}
        coverage = [
            (symbols, symbols, frozenset(inverse[i] for i in support))
            for symbols, support in sorted(mined.items())
        ]

    def fit_and_eval():
        model = train(sorted(labeled), labeled, dataset, config.train)
        record = evaluate(
            model,
            test_ids,
            oracle,
            dataset,
            iteration=len(records) + 1,
            labeled_count=len(labeled),
        )
        return model, record

    records: list[IterationRecord] = []
    curve: list[tuple[int, float]] = []
    model, record = fit_and_eval()
    records.append(record)
    curve.append((len(labeled), record.overall_f1))

    while (
        curve[-1][1] < config.target_f1
        and len(labeled) < config.max_labels
        and unlabeled
    ):
        if config.strategy == "template":
            batch = _template_batch(
                coverage, labeled, unlabeled, config.batch_size
            )
            if not batch:
                batch = sorted(unlabeled)[: config.batch_size]
        elif config.strategy == "uncertainty":
            # The model refit during the last evaluation saw exactly the
            # current labeled set, so it doubles as the selection model.
            open_ids = sorted(unlabeled)
            probs = model.predict_proba(feature_matrix(open_ids, dataset))
            scores = _entropy(probs)
            order = sorted(range(len(open_ids)), key=lambda i: (-scores[i], open_ids[i]))
            batch = [open_ids[i] for i in order[: config.batch_size]]
        else:
            open_ids = sorted(unlabeled)
            take = min(config.batch_size, len(open_ids))
            picks = rng.choice(len(open_ids), size=take, replace=False)
            batch = [open_ids[i] for i in sorted(int(p) for p in picks)]
        budget = config.max_labels - len(labeled)
        for vid in batch[:budget]:
            labeled[vid] = oracle[vid]
            unlabeled.discard(vid)
        model, record = fit_and_eval()
        records.append(record)
        curve.append((len(labeled), record.overall_f1))

    reached = curve[-1][1] >= config.target_f1
    labels_to_target = None
    for count, f1 in curve:
        if f1 >= config.target_f1:
            labels_to_target = count
            break
    return SimulationResult(
        strategy=config.strategy,
        curve=tuple(curve),
        labels_to_target=labels_to_target,
        reached=reached,
        records=tuple(records),
    )


def compare_strategies(
    dataset: Dataset,
    oracle: Mapping[str, str],
    seeds: tuple[int, ...],
    target_f1: float = 0.85,
    **config_kwargs,
) -> dict[str, list[SimulationResult]]:
    """Run template and uncertainty across seeds; inputs to the Table-style
    labels-to-target comparison."""
    out: dict[str, list[SimulationResult]] = {"template": [], "uncertainty": []}
    for strategy in out:
        for seed in seeds:
            config = SimulationConfig(
                strategy=strategy,
                oracle=oracle,
                target_f1=target_f1,
                seed=seed,
                train=TrainConfig(epochs=200, seed=seed),
                **config_kwargs,
            )
            out[strategy].append(simulate(dataset, config))
    return out


def median(values: list[float]) -> float:
    ordered = sorted(values)
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0
