"""Append-only labeling ledger with conflict surfacing.

Every labeling action is a LabelEvent appended to a log; the current view
and the conflict set are pure folds over that log, so replaying a persisted
log reconstructs the store bit-exactly.  Relabeling with a different class
is allowed (latest wins) but flags the video as conflicted until a manual
resolution event clears it.
"""

from __future__ import annotations

import json
import os
import time
from collections.abc import Callable, Collection, Iterable, Mapping
from dataclasses import dataclass, field

from .types import SymbolString

SOURCE_SEED = "seed"
SOURCE_MANUAL = "manual"


def template_source(symbols: SymbolString) -> str:
    return f"template:{symbols}"


@dataclass(frozen=True)
class LabelEvent:
    video_id: str
    class_id: str
    source: str
    iteration: int
    timestamp: float
    actor: str
    resolves: bool = False

    def __post_init__(self) -> None:
        if self.iteration < 0:
            raise ValueError("iteration must be >= 0")
        if self.source == SOURCE_SEED and self.iteration != 0:
            raise ValueError("seed labels are only valid at iteration 0")
        if self.resolves and self.source != SOURCE_MANUAL:
            raise ValueError("resolution events must be manual")

    def to_record(self) -> dict:
        return {
            "video_id": self.video_id,
            "class": self.class_id,
            "source": self.source,
            "iteration": self.iteration,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "resolves": self.resolves,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "LabelEvent":
        return cls(
            video_id=record["video_id"],
            class_id=record["class"],
            source=record.get("source", SOURCE_MANUAL),
            iteration=int(record.get("iteration", 0)),
            timestamp=float(record.get("timestamp", 0.0)),
            actor=record.get("actor", "user"),
            resolves=bool(record.get("resolves", False)),
        )


@dataclass(frozen=True)
class LabelState:
    """Latest-wins view plus the set of unresolved conflicts."""

    current: dict[str, str]
    conflicts: frozenset[str]
    sources: dict[str, str] = field(default_factory=dict)
    iterations: dict[str, int] = field(default_factory=dict)


def fold_events(events: Iterable[LabelEvent]) -> LabelState:
    """Derive LabelState from an event log.  Pure; order matters."""
    current: dict[str, str] = {}
    sources: dict[str, str] = {}
    iterations: dict[str, int] = {}
    distinct: dict[str, set[str]] = {}
    conflicted: set[str] = set()
    for event in events:
        vid = event.video_id
        if event.resolves:
            distinct[vid] = {event.class_id}
            conflicted.discard(vid)
        else:
            distinct.setdefault(vid, set()).add(event.class_id)
            if len(distinct[vid]) >= 2:
                conflicted.add(vid)
        current[vid] = event.class_id
        sources[vid] = event.source
        iterations[vid] = event.iteration
    return LabelState(
        current=current,
        conflicts=frozenset(conflicted),
        sources=sources,
        iterations=iterations,
    )


class LabelStore:
    """Event log plus validation context; optionally write-through persisted."""

    def __init__(
        self,
        class_ids: Collection[str],
        video_ids: Collection[str],
        path: str | os.PathLike | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self._class_ids = frozenset(class_ids)
        self._video_ids = frozenset(video_ids)
        self._path = os.fspath(path) if path is not None else None
        self._clock = clock
        self._events: list[LabelEvent] = []

    @property
    def events(self) -> tuple[LabelEvent, ...]:
        return tuple(self._events)

    @property
    def state(self) -> LabelState:
        return fold_events(self._events)

    @property
    def current_iteration(self) -> int:
        return max((e.iteration for e in self._events), default=0)

    def _check(self, video_id: str, class_id: str) -> None:
        if video_id not in self._video_ids:
            raise KeyError(f"unknown video id {video_id!r}")
        if class_id not in self._class_ids:
            raise KeyError(f"unknown class {class_id!r}")

    def _append(self, batch: list[LabelEvent]) -> None:
        self._events.extend(batch)
        if self._path is not None and batch:
            with open(self._path, "a", encoding="utf-8") as fh:
                for event in batch:
                    fh.write(json.dumps(event.to_record()) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def apply_labels(
        self,
        ids: Iterable[str],
        class_id: str,
        source: str,
        iteration: int,
        actor: str = "user",
    ) -> tuple[int, frozenset[str]]:
        """Label a batch; returns (count applied, conflicts raised by this batch)."""
        ordered = sorted(set(ids))
        if not ordered:
            return 0, frozenset()
        for vid in ordered:
            self._check(vid, class_id)
        before = self.state.conflicts
        now = self._clock()
        batch = [
            LabelEvent(
                video_id=vid,
                class_id=class_id,
                source=source,
                iteration=iteration,
                timestamp=now,
                actor=actor,
            )
            for vid in ordered
        ]
        self._append(batch)
        raised = self.state.conflicts - before
        return len(batch), raised

    def resolve_conflict(self, video_id: str, class_id: str, actor: str = "user") -> LabelState:
        """Settle a conflicted video with a manual resolution event."""
        self._check(video_id, class_id)
        if video_id not in self.state.conflicts:
            raise ValueError(f"{video_id!r} is not conflicted")
        event = LabelEvent(
            video_id=video_id,
            class_id=class_id,
            source=SOURCE_MANUAL,
            iteration=self.current_iteration,
            timestamp=self._clock(),
            actor=actor,
            resolves=True,
        )
        self._append([event])
        return self.state

    def snapshot(self, iteration: int | None = None) -> LabelState:
        """State as of an iteration (inclusive); None means live state."""
        if iteration is None:
            return self.state
        if iteration > self.current_iteration:
            raise ValueError(
                f"iteration {iteration} is in the future (current {self.current_iteration})"
            )
        return fold_events(e for e in self._events if e.iteration <= iteration)

    def history(self, video_id: str | None = None) -> tuple[LabelEvent, ...]:
        if video_id is None:
            return self.events
        return tuple(e for e in self._events if e.video_id == video_id)

    def export_current(self, path: str | os.PathLike) -> int:
        """Write the current view in the seed-labels file format."""
        state = self.state
        with open(path, "w", encoding="utf-8") as fh:
            for vid in sorted(state.current):
                record = {
                    "video_id": vid,
                    "class": state.current[vid],
                    "source": state.sources[vid],
                }
                fh.write(json.dumps(record) + "\n")
        return len(state.current)

    @classmethod
    def load(
        cls,
        path: str | os.PathLike,
        class_ids: Collection[str],
        video_ids: Collection[str],
        clock: Callable[[], float] = time.time,
    ) -> "LabelStore":
        """Rebuild a store by replaying a persisted log."""
        store = cls(class_ids, video_ids, path=None, clock=clock)
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        store._events.append(LabelEvent.from_record(json.loads(line)))
        store._path = os.fspath(path)
        return store
