"""Domain types shared by every other module: event codes, sequences, datasets.

A video is represented as an ordered list of typed, timestamped events.  For
mining and edit-distance purposes only the order matters; the projection of a
sequence onto its event codes is a plain ``str`` (one registry symbol per
event), called a symbol string throughout the codebase.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np

# A symbol string is the timestamp-free projection of an event sequence:
# one single-character event code per event, in sequence order.
SymbolString = str


class DatasetError(ValueError):
    """Validation failure; ``problems`` lists every offending record."""

    def __init__(self, problems: Iterable[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class EventType:
    """One entry of the event-code registry."""

    code: str
    name: str
    description: str = ""

    def __post_init__(self) -> None:
        if len(self.code) != 1 or not self.code.isprintable() or self.code == " ":
            raise ValueError(f"event code must be one printable symbol, got {self.code!r}")


class EventRegistry:
    """The set of known event types, keyed by their single-symbol codes."""

    def __init__(self, types: Iterable[EventType]):
        self.types = tuple(types)
        by_code: dict[str, EventType] = {}
        for t in self.types:
            if t.code in by_code:
                raise ValueError(f"duplicate event code {t.code!r}")
            by_code[t.code] = t
        self._by_code = by_code

    @property
    def alphabet(self) -> tuple[str, ...]:
        """Registered codes in sorted order (the canonical feature order)."""
        return tuple(sorted(self._by_code))

    def __contains__(self, code: str) -> bool:
        return code in self._by_code

    def __getitem__(self, code: str) -> EventType:
        return self._by_code[code]

    def __iter__(self) -> Iterator[EventType]:
        return iter(self.types)

    def __len__(self) -> int:
        return len(self.types)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EventRegistry) and self.types == other.types

    def unknown_symbols(self, symbols: Iterable[str]) -> list[str]:
        """Distinct symbols not present in the registry, in input order."""
        seen: list[str] = []
        for s in symbols:
            if s not in self._by_code and s not in seen:
                seen.append(s)
        return seen


@dataclass(frozen=True)
class EventInstance:
    """A single detected event: (code, t_start, t_end) in seconds."""

    code: str
    t_start: float
    t_end: float

    def __post_init__(self) -> None:
        if self.t_start < 0:
            raise ValueError(f"t_start must be >= 0, got {self.t_start}")
        if self.t_end < self.t_start:
            raise ValueError(f"t_end {self.t_end} precedes t_start {self.t_start}")


@dataclass(frozen=True)
class EventSequence:
    """One video's ordered event list.

    Events are kept sorted by (t_start, t_end, code); construction re-sorts,
    so any iteration order in the input file is acceptable.
    """

    video_id: str
    duration: float
    events: tuple[EventInstance, ...]
    thumbnail: str | None = None

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ValueError("video_id must be non-empty")
        if self.duration <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        for e in self.events:
            if e.t_end > self.duration:
                raise ValueError(
                    f"event {e.code!r} ends at {e.t_end} past duration {self.duration}"
                )
        ordered = tuple(sorted(self.events, key=lambda e: (e.t_start, e.t_end, e.code)))
        object.__setattr__(self, "events", ordered)

    def __len__(self) -> int:
        return len(self.events)


def symbol_string(seq: EventSequence) -> SymbolString:
    """Project a sequence to its event codes, timestamps dropped."""
    return "".join(e.code for e in seq.events)


@dataclass(frozen=True)
class ClassInfo:
    """A label class with its display metadata."""

    class_id: str
    name: str
    color: str = "#888888"


@dataclass(frozen=True)
class Dataset:
    """A validated, immutable corpus of event sequences.

    ``embeddings`` maps video ids to fixed-dimension float vectors and may be
    absent (similarity then falls back to pure edit similarity).  ``seed_labels``
    are the ground-truth labels available before any programming happens.
    """

    registry: EventRegistry
    sequences: Mapping[str, EventSequence]
    classes: tuple[ClassInfo, ...] = ()
    embeddings: Mapping[str, np.ndarray] | None = None
    seed_labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        problems: list[str] = []
        for vid, seq in self.sequences.items():
            if vid != seq.video_id:
                problems.append(f"sequence keyed {vid!r} carries video_id {seq.video_id!r}")
            unknown = self.registry.unknown_symbols(e.code for e in seq.events)
            if unknown:
                problems.append(f"record {vid!r} uses unregistered codes {unknown}")
        if self.embeddings:
            dims = {len(v) for v in self.embeddings.values()}
            if len(dims) > 1:
                problems.append(f"embedding dimensions differ: {sorted(dims)}")
            for vid in self.embeddings:
                if vid not in self.sequences:
                    problems.append(f"embedding for unknown video {vid!r}")
        class_ids = {c.class_id for c in self.classes}
        for vid, cls in self.seed_labels.items():
            if vid not in self.sequences:
                problems.append(f"seed label for unknown video {vid!r}")
            if cls not in class_ids:
                problems.append(f"seed label class {cls!r} for {vid!r} is not registered")
        if problems:
            raise DatasetError(problems)

    @property
    def class_ids(self) -> tuple[str, ...]:
        return tuple(c.class_id for c in self.classes)

    @property
    def embedding_dim(self) -> int | None:
        if not self.embeddings:
            return None
        return len(next(iter(self.embeddings.values())))

    def symbols(self, video_id: str) -> SymbolString:
        return symbol_string(self.sequences[video_id])

    def symbol_map(self) -> dict[str, SymbolString]:
        """Symbol strings for every sequence, in ingestion order."""
        return {vid: symbol_string(seq) for vid, seq in self.sequences.items()}
