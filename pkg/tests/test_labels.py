"""Event-sourced label store: folds, conflicts, persistence, replay."""

from __future__ import annotations

import itertools
import json
import random

import pytest

from seqlab.labels import (
    SOURCE_MANUAL,
    SOURCE_SEED,
    LabelEvent,
    LabelStore,
    fold_events,
    template_source,
)

CLASSES = ("c0", "c1", "c2")
VIDEOS = tuple(f"v{i}" for i in range(8))


def ticking_clock():
    counter = itertools.count()
    return lambda: float(next(counter))


def test_latest_wins_and_conflict_lifecycle():
    store = LabelStore(CLASSES, VIDEOS, clock=ticking_clock())
    applied, raised = store.apply_labels(["v0", "v1"], "c0", SOURCE_MANUAL, iteration=1)
    assert applied == 2 and raised == frozenset()
    # Relabeling with the same class raises no conflict.
    _, raised = store.apply_labels(["v0"], "c0", SOURCE_MANUAL, iteration=1)
    assert raised == frozenset()
    # A different class wins but flags the conflict.
    _, raised = store.apply_labels(["v0"], "c1", SOURCE_MANUAL, iteration=2)
    assert raised == {"v0"}
    state = store.state
    assert state.current["v0"] == "c1"
    assert state.conflicts == {"v0"}
    # Resolution clears the conflict and sets the final class.
    state = store.resolve_conflict("v0", "c0")
    assert state.current["v0"] == "c0"
    assert state.conflicts == frozenset()
    # Relabeling after resolution can conflict again.
    _, raised = store.apply_labels(["v0"], "c2", SOURCE_MANUAL, iteration=3)
    assert raised == {"v0"}


def test_resolve_requires_existing_conflict():
    store = LabelStore(CLASSES, VIDEOS, clock=ticking_clock())
    store.apply_labels(["v0"], "c0", SOURCE_MANUAL, iteration=1)
    with pytest.raises(ValueError):
        store.resolve_conflict("v0", "c0")


def test_validation_rejects_unknown_ids_and_classes():
    store = LabelStore(CLASSES, VIDEOS, clock=ticking_clock())
    with pytest.raises(KeyError):
        store.apply_labels(["nope"], "c0", SOURCE_MANUAL, iteration=1)
    with pytest.raises(KeyError):
        store.apply_labels(["v0"], "c9", SOURCE_MANUAL, iteration=1)
    assert store.events == ()


def test_seed_labels_only_at_iteration_zero():
    with pytest.raises(ValueError):
        LabelEvent("v0", "c0", SOURCE_SEED, iteration=1, timestamp=0.0, actor="x")
    with pytest.raises(ValueError):
        LabelEvent(
            "v0", "c0", SOURCE_SEED, iteration=0, timestamp=0.0, actor="x", resolves=True
        )


def test_template_source_tagging():
    assert template_source("ABAF") == "template:ABAF"
    store = LabelStore(CLASSES, VIDEOS, clock=ticking_clock())
    store.apply_labels(["v1"], "c1", template_source("AB"), iteration=1)
    assert store.state.sources["v1"] == "template:AB"
    assert store.state.iterations["v1"] == 1


def test_snapshot_rewinds_by_iteration():
    store = LabelStore(CLASSES, VIDEOS, clock=ticking_clock())
    store.apply_labels(["v0"], "c0", SOURCE_SEED, iteration=0)
    store.apply_labels(["v1"], "c1", SOURCE_MANUAL, iteration=1)
    store.apply_labels(["v0"], "c2", SOURCE_MANUAL, iteration=2)
    past = store.snapshot(1)
    assert past.current == {"v0": "c0", "v1": "c1"}
    assert past.conflicts == frozenset()
    live = store.snapshot()
    assert live.current["v0"] == "c2"
    assert live.conflicts == {"v0"}
    with pytest.raises(ValueError):
        store.snapshot(99)


def test_history_filters_by_video():
    store = LabelStore(CLASSES, VIDEOS, clock=ticking_clock())
    store.apply_labels(["v0", "v1"], "c0", SOURCE_MANUAL, iteration=1)
    store.apply_labels(["v0"], "c1", SOURCE_MANUAL, iteration=2)
    assert len(store.history()) == 3
    assert [e.class_id for e in store.history("v0")] == ["c0", "c1"]


def test_fold_is_pure_and_order_sensitive():
    events = [
        LabelEvent("v0", "c0", SOURCE_MANUAL, 1, 0.0, "u"),
        LabelEvent("v0", "c1", SOURCE_MANUAL, 2, 1.0, "u"),
    ]
    assert fold_events(events).current["v0"] == "c1"
    assert fold_events(reversed(events)).current["v0"] == "c0"
    assert fold_events(events) == fold_events(events)


def random_ops(rng: random.Random, store: LabelStore) -> None:
    for _ in range(rng.randint(1, 10)):
        conflicts = sorted(store.state.conflicts)
        if conflicts and rng.random() < 0.25:
            store.resolve_conflict(rng.choice(conflicts), rng.choice(CLASSES))
            continue
        ids = rng.sample(VIDEOS, rng.randint(1, 4))
        source = rng.choice([SOURCE_MANUAL, template_source("AB"), "model"])
        store.apply_labels(
            ids,
            rng.choice(CLASSES),
            source,
            iteration=rng.randint(1, 5),
            actor=rng.choice(["alice", "bob"]),
        )


def test_replay_reconstructs_store_bit_exactly(tmp_path):
    rng = random.Random(1000003)
    for trial in range(1000):
        path = tmp_path / f"log-{trial % 8}.jsonl"
        if path.exists():
            path.unlink()
        store = LabelStore(CLASSES, VIDEOS, path=path, clock=ticking_clock())
        random_ops(rng, store)
        replayed = LabelStore.load(path, CLASSES, VIDEOS)
        assert replayed.events == store.events
        assert replayed.state == store.state
        assert replayed.state.conflicts == store.state.conflicts
        assert replayed.current_iteration == store.current_iteration


def test_export_current_round_trips(tmp_path):
    store = LabelStore(CLASSES, VIDEOS, clock=ticking_clock())
    store.apply_labels(["v0", "v2"], "c1", SOURCE_MANUAL, iteration=1)
    out = tmp_path / "labels.jsonl"
    count = store.export_current(out)
    assert count == 2
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert records == [
        {"video_id": "v0", "class": "c1", "source": SOURCE_MANUAL},
        {"video_id": "v2", "class": "c1", "source": SOURCE_MANUAL},
    ]


def test_event_record_round_trip():
    event = LabelEvent("v0", "c1", "template:AB", 3, 12.5, "alice", resolves=False)
    assert LabelEvent.from_record(event.to_record()) == event
