"""Shared test helpers: compact dataset construction from symbol strings."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

from seqlab.types import (
    ClassInfo,
    Dataset,
    EventInstance,
    EventRegistry,
    EventSequence,
    EventType,
)


def sequence_from_symbols(video_id: str, symbols: str) -> EventSequence:
    events = tuple(
        EventInstance(code=ch, t_start=float(i), t_end=float(i) + 0.5)
        for i, ch in enumerate(symbols)
    )
    return EventSequence(
        video_id=video_id, duration=float(max(len(symbols), 1)), events=events
    )


def dataset_from_strings(
    strings: Mapping[str, str],
    embeddings: Mapping[str, Sequence[float]] | None = None,
    class_ids: Sequence[str] = (),
    seed_labels: Mapping[str, str] | None = None,
    extra_codes: str = "",
) -> Dataset:
    codes = sorted(set("".join(strings.values())) | set(extra_codes))
    registry = EventRegistry(EventType(code=c, name=f"event {c}") for c in codes)
    sequences = {vid: sequence_from_symbols(vid, s) for vid, s in strings.items()}
    classes = tuple(ClassInfo(class_id=c, name=c) for c in class_ids)
    return Dataset(
        registry=registry,
        sequences=sequences,
        classes=classes,
        embeddings=dict(embeddings) if embeddings else None,
        seed_labels=dict(seed_labels or {}),
    )
