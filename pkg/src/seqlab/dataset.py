"""Dataset ingestion and serialization.

File formats (all UTF-8):

* events:      JSON lines, one video per line:
               ``{"video_id", "duration", "events": [{"type", "t_start", "t_end"}], "thumbnail"?}``
* registry:    JSON lines: ``{"code", "name", "description"}``
* classes:     one JSON object: ``{class_id: {"name", "color"}}`` (insertion order kept)
* labels:      JSON lines: ``{"video_id", "class", "source"}``
* embeddings:  CSV with header ``video_id,d0,...,d{D-1}``
* projection:  CSV with header ``video_id,x,y``
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .types import (
    ClassInfo,
    Dataset,
    DatasetError,
    EventInstance,
    EventRegistry,
    EventSequence,
    EventType,
)

EVENTS_FILE = "events.jsonl"
REGISTRY_FILE = "registry.jsonl"
CLASSES_FILE = "classes.json"
LABELS_FILE = "labels.jsonl"
EMBEDDINGS_FILE = "embeddings.csv"


def _jsonl_records(path: str | os.PathLike) -> list[tuple[int, dict]]:
    """Parse a JSON-lines file into (line_number, record) pairs."""
    records: list[tuple[int, dict]] = []
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"{path}:{lineno}: malformed JSON ({exc.msg})")
                continue
            if not isinstance(obj, dict):
                problems.append(f"{path}:{lineno}: expected an object")
                continue
            records.append((lineno, obj))
    if problems:
        raise DatasetError(problems)
    return records


def read_registry(path: str | os.PathLike) -> EventRegistry:
    types: list[EventType] = []
    problems: list[str] = []
    for lineno, rec in _jsonl_records(path):
        try:
            types.append(
                EventType(
                    code=str(rec["code"]),
                    name=str(rec.get("name", rec["code"])),
                    description=str(rec.get("description", "")),
                )
            )
        except (KeyError, ValueError) as exc:
            problems.append(f"{path}:{lineno}: {exc}")
    if problems:
        raise DatasetError(problems)
    try:
        return EventRegistry(types)
    except ValueError as exc:
        raise DatasetError([f"{path}: {exc}"]) from exc


def read_classes(path: str | os.PathLike) -> tuple[ClassInfo, ...]:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError([f"{path}: malformed JSON ({exc.msg})"]) from exc
    if not isinstance(obj, dict):
        raise DatasetError([f"{path}: expected an object keyed by class id"])
    classes = []
    for class_id, meta in obj.items():
        meta = meta or {}
        classes.append(
            ClassInfo(
                class_id=class_id,
                name=str(meta.get("name", class_id)),
                color=str(meta.get("color", "#888888")),
            )
        )
    return tuple(classes)


def read_events(path: str | os.PathLike) -> dict[str, EventSequence]:
    sequences: dict[str, EventSequence] = {}
    problems: list[str] = []
    for lineno, rec in _jsonl_records(path):
        try:
            events = tuple(
                EventInstance(
                    code=str(e["type"]),
                    t_start=float(e["t_start"]),
                    t_end=float(e["t_end"]),
                )
                for e in rec.get("events", [])
            )
            seq = EventSequence(
                video_id=str(rec["video_id"]),
                duration=float(rec["duration"]),
                events=events,
                thumbnail=rec.get("thumbnail"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"{path}:{lineno}: {exc}")
            continue
        if seq.video_id in sequences:
            problems.append(f"{path}:{lineno}: duplicate video_id {seq.video_id!r}")
            continue
        sequences[seq.video_id] = seq
    if problems:
        raise DatasetError(problems)
    return sequences


def read_embeddings(path: str | os.PathLike) -> dict[str, np.ndarray]:
    embeddings: dict[str, np.ndarray] = {}
    problems: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError([f"{path}: empty embeddings file"]) from None
        if not header or header[0] != "video_id":
            raise DatasetError([f"{path}: header must start with 'video_id'"])
        dim = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                problems.append(f"{path}:{lineno}: expected {dim} values, got {len(row) - 1}")
                continue
            vid = row[0]
            if vid in embeddings:
                problems.append(f"{path}:{lineno}: duplicate video_id {vid!r}")
                continue
            try:
                embeddings[vid] = np.array([float(x) for x in row[1:]], dtype=float)
            except ValueError:
                problems.append(f"{path}:{lineno}: non-numeric embedding value")
    if problems:
        raise DatasetError(problems)
    return embeddings


def read_labels(path: str | os.PathLike) -> dict[str, str]:
    labels: dict[str, str] = {}
    problems: list[str] = []
    for lineno, rec in _jsonl_records(path):
        try:
            vid, cls = str(rec["video_id"]), str(rec["class"])
        except KeyError as exc:
            problems.append(f"{path}:{lineno}: missing key {exc}")
            continue
        if vid in labels:
            problems.append(f"{path}:{lineno}: duplicate label for {vid!r}")
            continue
        labels[vid] = cls
    if problems:
        raise DatasetError(problems)
    return labels


def ingest_dataset(
    events_path: str | os.PathLike,
    registry_path: str | os.PathLike,
    embeddings_path: str | os.PathLike | None = None,
    labels_path: str | os.PathLike | None = None,
    classes_path: str | os.PathLike | None = None,
) -> Dataset:
    """Load and validate a dataset from its on-disk parts.

    Raises DatasetError listing every offending record; never returns a
    partially valid Dataset.
    """
    registry = read_registry(registry_path)
    sequences = read_events(events_path)
    embeddings = read_embeddings(embeddings_path) if embeddings_path else None
    seed_labels = read_labels(labels_path) if labels_path else {}
    if classes_path:
        classes = read_classes(classes_path)
    elif seed_labels:
        raise DatasetError(["labels supplied without a classes config"])
    else:
        classes = ()
    return Dataset(
        registry=registry,
        sequences=sequences,
        classes=classes,
        embeddings=embeddings,
        seed_labels=seed_labels,
    )


def ingest_dir(root: str | os.PathLike) -> Dataset:
    """Ingest a directory laid out by ``write_dataset``."""
    root = Path(root)
    embeddings = root / EMBEDDINGS_FILE
    labels = root / LABELS_FILE
    classes = root / CLASSES_FILE
    return ingest_dataset(
        events_path=root / EVENTS_FILE,
        registry_path=root / REGISTRY_FILE,
        embeddings_path=embeddings if embeddings.exists() else None,
        labels_path=labels if labels.exists() else None,
        classes_path=classes if classes.exists() else None,
    )


def write_dataset(dataset: Dataset, out_dir: str | os.PathLike) -> Path:
    """Serialize a dataset into ``out_dir`` using the standard file layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / EVENTS_FILE, "w", encoding="utf-8") as fh:
        for seq in dataset.sequences.values():
            rec: dict = {
                "video_id": seq.video_id,
                "duration": seq.duration,
                "events": [
                    {"type": e.code, "t_start": e.t_start, "t_end": e.t_end}
                    for e in seq.events
                ],
            }
            if seq.thumbnail is not None:
                rec["thumbnail"] = seq.thumbnail
            fh.write(json.dumps(rec) + "\n")
    with open(out / REGISTRY_FILE, "w", encoding="utf-8") as fh:
        for t in dataset.registry:
            fh.write(
                json.dumps({"code": t.code, "name": t.name, "description": t.description})
                + "\n"
            )
    if dataset.classes:
        with open(out / CLASSES_FILE, "w", encoding="utf-8") as fh:
            json.dump(
                {c.class_id: {"name": c.name, "color": c.color} for c in dataset.classes},
                fh,
                indent=2,
            )
    if dataset.embeddings:
        dim = dataset.embedding_dim or 0
        with open(out / EMBEDDINGS_FILE, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["video_id"] + [f"d{i}" for i in range(dim)])
            for vid, vec in dataset.embeddings.items():
                writer.writerow([vid] + [repr(float(x)) for x in vec])
    if dataset.seed_labels:
        write_labels(dataset.seed_labels, out / LABELS_FILE)
    return out


def write_labels(labels: dict[str, str], path: str | os.PathLike, source: str = "seed") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for vid, cls in labels.items():
            fh.write(json.dumps({"video_id": vid, "class": cls, "source": source}) + "\n")


def read_projection(path: str | os.PathLike) -> dict[str, tuple[float, float]]:
    coords: dict[str, tuple[float, float]] = {}
    problems: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["video_id", "x", "y"]:
            raise DatasetError([f"{path}: header must be video_id,x,y"])
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                coords[row[0]] = (float(row[1]), float(row[2]))
            except (IndexError, ValueError):
                problems.append(f"{path}:{lineno}: malformed projection row")
    if problems:
        raise DatasetError(problems)
    return coords


def write_projection(coords: dict[str, tuple[float, float]], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "x", "y"])
        for vid, (x, y) in coords.items():
            writer.writerow([vid, repr(float(x)), repr(float(y))])
