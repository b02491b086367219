"""Command-line workflow: every service capability, headless.

A session is a directory holding the normalized dataset files, the label
event log, and the retrain loop's artifacts (model.json, metrics.jsonl,
loop.json).  Subcommands read the session, do one operation, persist what
changed, and print a one-line JSON summary to stdout; failures print a JSON
diagnostic to stderr and exit nonzero.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
from pathlib import Path

import click

from .dataset import (
    ingest_dataset,
    read_labels,
    read_projection,
    write_dataset,
    write_projection,
)
from .labels import SOURCE_MANUAL, LabelStore
from .mindl import BandParams, cluster
from .mining import MiningConstraints, mine_coverage, template_metrics
from .model import (
    Classifier,
    IterationRecord,
    TrainConfig,
    evaluate,
    project,
    train,
)
from .similarity import SimilarityWeights, retrieve
from .simulate import SimulationConfig, generate_synthetic, simulate
from .types import Dataset, DatasetError

LOG_FILE = "labels.log.jsonl"
ORACLE_FILE = "oracle.jsonl"
MODEL_FILE = "model.json"
METRICS_FILE = "metrics.jsonl"
LOOP_FILE = "loop.json"
PROJECTION_FILE = "projection.csv"

EXIT_ERROR = 1
EXIT_THRESHOLD = 3


def _fail(message: str, code: int = EXIT_ERROR, **fields) -> None:
    sys.stderr.write(json.dumps({"error": message, **fields}) + "\n")
    sys.exit(code)


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload))


def _emit_records(records: list[dict], out: Path | None) -> None:
    """Write records to --out when given, otherwise one JSON line each."""
    if out is not None:
        with open(out, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
    else:
        for rec in records:
            _emit(rec)


def _load_dataset(session: Path) -> Dataset:
    embeddings = session / "embeddings.csv"
    classes = session / "classes.json"
    try:
        return ingest_dataset(
            events_path=session / "events.jsonl",
            registry_path=session / "registry.jsonl",
            embeddings_path=embeddings if embeddings.exists() else None,
            classes_path=classes if classes.exists() else None,
        )
    except FileNotFoundError as exc:
        _fail(f"session is missing {exc.filename}")
    except DatasetError as exc:
        _fail("invalid dataset", problems=exc.problems)


def _open_store(session: Path, dataset: Dataset) -> LabelStore:
    return LabelStore.load(session / LOG_FILE, dataset.class_ids, list(dataset.sequences))


def _load_records(session: Path) -> list[IterationRecord]:
    path = session / METRICS_FILE
    if not path.exists():
        return []
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(IterationRecord.from_record(json.loads(line)))
    return records


def _load_loop_state(session: Path) -> dict:
    path = session / LOOP_FILE
    if not path.exists():
        return {"events_at_retrain": 0}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _save_loop_state(session: Path, state: dict) -> None:
    with open(session / LOOP_FILE, "w", encoding="utf-8") as fh:
        json.dump(state, fh)


def _load_model(session: Path) -> Classifier | None:
    path = session / MODEL_FILE
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        return Classifier.from_record(json.load(fh))


def _constraints(min_support: int, min_length: int, max_length: int, max_gap: int | None):
    try:
        return MiningConstraints(
            min_support=min_support,
            min_length=min_length,
            max_length=max_length,
            max_gap=max_gap,
        )
    except ValueError as exc:
        _fail(str(exc))


session_option = click.option(
    "--session",
    "session_dir",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Session directory holding the dataset and artifacts.",
)


@click.group()
@click.version_option(package_name="seqlab")
def main() -> None:
    """Data-programming workbench for event-coded videos."""


@main.command()
@click.option("--events", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--registry", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--classes", type=click.Path(exists=True, path_type=Path))
@click.option("--embeddings", type=click.Path(exists=True, path_type=Path))
@click.option("--labels", type=click.Path(exists=True, path_type=Path))
@session_option
def ingest(events, registry, classes, embeddings, labels, session_dir: Path) -> None:
    """Validate raw files and normalize them into a session directory."""
    try:
        dataset = ingest_dataset(
            events_path=events,
            registry_path=registry,
            embeddings_path=embeddings,
            labels_path=labels,
            classes_path=classes,
        )
    except DatasetError as exc:
        _fail("invalid dataset", problems=exc.problems)
    session_dir.mkdir(parents=True, exist_ok=True)
    write_dataset(dataclasses.replace(dataset, seed_labels={}), session_dir)
    label_path = session_dir / LOG_FILE
    if label_path.exists():
        label_path.unlink()
    store = LabelStore(dataset.class_ids, list(dataset.sequences), path=label_path)
    for class_id in sorted(set(dataset.seed_labels.values())):
        ids = [vid for vid, c in dataset.seed_labels.items() if c == class_id]
        store.apply_labels(ids, class_id, source="seed", iteration=0, actor="ingest")
    _emit(
        {
            "session": str(session_dir),
            "videos": len(dataset.sequences),
            "events": sum(len(s.events) for s in dataset.sequences.values()),
            "classes": len(dataset.classes),
            "seed_labels": len(dataset.seed_labels),
        }
    )


@main.command()
@click.option("--classes", "n_classes", default=4, show_default=True)
@click.option("--patterns-per-class", default=3, show_default=True)
@click.option("--noise", default=0.2, show_default=True)
@click.option("--n", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--hard-fraction", default=0.06, show_default=True)
@session_option
def synth(n_classes, patterns_per_class, noise, n, seed, hard_fraction, session_dir: Path) -> None:
    """Generate a synthetic dataset plus oracle labels into a session."""
    try:
        dataset, oracle = generate_synthetic(
            n_classes=n_classes,
            patterns_per_class=patterns_per_class,
            noise=noise,
            n=n,
            seed=seed,
            hard_fraction=hard_fraction,
        )
    except ValueError as exc:
        _fail(str(exc))
    session_dir.mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, session_dir)
    with open(session_dir / ORACLE_FILE, "w", encoding="utf-8") as fh:
        for vid, class_id in oracle.items():
            fh.write(json.dumps({"video_id": vid, "class": class_id, "source": "oracle"}) + "\n")
    _emit(
        {
            "session": str(session_dir),
            "videos": len(dataset.sequences),
            "classes": n_classes,
            "oracle": len(oracle),
            "seed": seed,
        }
    )


@main.command()
@session_option
@click.option("--min-support", default=2, show_default=True)
@click.option("--min-length", default=1, show_default=True)
@click.option("--max-length", default=6, show_default=True)
@click.option("--max-gap", default=None, type=int)
@click.option("--out", type=click.Path(path_type=Path), help="Write template records here.")
def mine(session_dir: Path, min_support, min_length, max_length, max_gap, out) -> None:
    """Mine frequent templates and score them against current labels."""
    dataset = _load_dataset(session_dir)
    constraints = _constraints(min_support, min_length, max_length, max_gap)
    store = _open_store(session_dir, dataset)
    labels = store.state.current
    try:
        coverage = mine_coverage(dataset, constraints)
    except ValueError as exc:
        _fail(str(exc))
    records = []
    for symbols in sorted(coverage, key=lambda s: (len(s), s)):
        metrics = template_metrics(
            dataset, symbols, labels=labels, covered_ids=coverage[symbols]
        )
        records.append(
            {
                "symbols": symbols,
                "support": len(coverage[symbols]),
                "length": len(symbols),
                "class_counts": metrics.class_counts,
                "purity": metrics.purity,
                "unlabeled_count": metrics.unlabeled_count,
            }
        )
    _emit_records(records, out)
    _emit({"templates": len(records), "out": str(out) if out else None})


@main.command("cluster")
@session_option
@click.option("--template", "symbols", required=True)
@click.option("--alpha", default=0.8, show_default=True)
@click.option("--lam", "--lambda", "lam", default=0.0, show_default=True)
@click.option("--lsh/--no-lsh", default=False, show_default=True)
@click.option("--max-gap", default=None, type=int)
@click.option("--out", type=click.Path(path_type=Path))
def cluster_cmd(session_dir: Path, symbols, alpha, lam, lsh, max_gap, out) -> None:
    """Split a template's matches into MinDL summary clusters."""
    from .mining import matching_ids

    dataset = _load_dataset(session_dir)
    constraints = MiningConstraints(min_support=1, max_length=max(6, len(symbols)), max_gap=max_gap)
    member_ids = matching_ids(dataset, symbols, constraints)
    if not member_ids:
        _fail(f"no videos match template {symbols!r}")
    symbol_map = dataset.symbol_map()
    try:
        partition = cluster(
            [(vid, symbol_map[vid]) for vid in member_ids],
            symbols,
            alpha=alpha,
            lam=lam,
            lsh=BandParams() if lsh else None,
        )
    except ValueError as exc:
        _fail(str(exc))
    payload = {
        "seed_template": symbols,
        "alpha": alpha,
        "lam": lam,
        "total_dl": partition.total_dl,
        "clusters": [
            {
                "representative": c.representative,
                "member_ids": list(c.member_ids),
                "edit_costs": list(c.edit_costs),
            }
            for c in partition.clusters
        ],
    }
    if out is not None:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    _emit(
        {
            "clusters": len(partition.clusters),
            "total_dl": partition.total_dl,
            "out": str(out) if out else None,
        }
    )


@main.command("retrieve")
@session_option
@click.option("--anchors", required=True, help="Comma-separated labeled video ids.")
@click.option("--w", default=0.5, show_default=True)
@click.option("--top-k", default=None, type=int)
@click.option("--out", type=click.Path(path_type=Path))
def retrieve_cmd(session_dir: Path, anchors, w, top_k, out) -> None:
    """Rank unlabeled videos against anchor videos."""
    dataset = _load_dataset(session_dir)
    store = _open_store(session_dir, dataset)
    current = store.state.current
    anchor_ids = [a for a in anchors.split(",") if a]
    candidates = [vid for vid in dataset.sequences if vid not in current]
    try:
        results = retrieve(
            anchor_ids, candidates, dataset, SimilarityWeights(w=w), top_k
        )
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    records = [
        {
            "video_id": r.video_id,
            "sim_total": r.sim_total,
            "sim_e": r.sim_e,
            "sim_v": r.sim_v,
            "best_anchor_id": r.best_anchor_id,
        }
        for r in results
    ]
    _emit_records(records, out)
    _emit({"results": len(records), "out": str(out) if out else None})


@main.command()
@session_option
@click.option("--ids", required=True, help="Comma-separated video ids.")
@click.option("--class-id", "--class", "class_id", required=True)
@click.option("--source", default=SOURCE_MANUAL, show_default=True)
@click.option("--actor", default="cli", show_default=True)
def label(session_dir: Path, ids, class_id, source, actor) -> None:
    """Apply one class to a batch of videos."""
    dataset = _load_dataset(session_dir)
    store = _open_store(session_dir, dataset)
    iteration = 0 if source == "seed" else len(_load_records(session_dir)) + 1
    id_list = [v for v in ids.split(",") if v]
    try:
        applied, conflicts = store.apply_labels(
            id_list, class_id, source=source, iteration=iteration, actor=actor
        )
    except (KeyError, ValueError) as exc:
        _fail(str(exc.args[0]) if exc.args else str(exc))
    state = store.state
    _emit(
        {
            "applied": applied,
            "conflicts_raised": sorted(conflicts),
            "labeled_count": len(state.current),
            "conflict_count": len(state.conflicts),
            "iteration": iteration,
        }
    )


@main.command()
@session_option
@click.option("--video-id", required=True)
@click.option("--class-id", "--class", "class_id", required=True)
@click.option("--actor", default="cli", show_default=True)
def resolve(session_dir: Path, video_id, class_id, actor) -> None:
    """Resolve one labeling conflict by choosing the final class."""
    dataset = _load_dataset(session_dir)
    store = _open_store(session_dir, dataset)
    try:
        state = store.resolve_conflict(video_id, class_id, actor=actor)
    except (KeyError, ValueError) as exc:
        _fail(str(exc.args[0]) if exc.args else str(exc))
    _emit(
        {
            "video_id": video_id,
            "class": state.current[video_id],
            "conflict_count": len(state.conflicts),
        }
    )


@main.command()
@session_option
@click.option("--threshold", default=32, show_default=True)
@click.option("--force/--no-force", default=False, show_default=True)
@click.option("--learning-rate", default=0.5, show_default=True)
@click.option("--epochs", default=300, show_default=True)
@click.option("--l2", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
def retrain(session_dir: Path, threshold, force, learning_rate, epochs, l2, seed) -> None:
    """Retrain the classifier when enough new labels arrived."""
    dataset = _load_dataset(session_dir)
    store = _open_store(session_dir, dataset)
    loop_state = _load_loop_state(session_dir)
    new_events = len(store.events) - int(loop_state.get("events_at_retrain", 0))
    if not force and new_events < threshold:
        _fail(
            "threshold not reached",
            code=EXIT_THRESHOLD,
            new_since_retrain=new_events,
            threshold=threshold,
        )
    current = store.state.current
    records = _load_records(session_dir)
    oracle_path = session_dir / ORACLE_FILE
    eval_labels = read_labels(oracle_path) if oracle_path.exists() else current
    config = TrainConfig(learning_rate=learning_rate, epochs=epochs, l2=l2, seed=seed)
    try:
        model = train(sorted(current), current, dataset, config)
    except ValueError as exc:
        _fail(str(exc))
    record = evaluate(
        model,
        sorted(eval_labels),
        eval_labels,
        dataset,
        iteration=len(records) + 1,
        labeled_count=len(current),
    )
    with open(session_dir / MODEL_FILE, "w", encoding="utf-8") as fh:
        json.dump(model.to_record(), fh)
    with open(session_dir / METRICS_FILE, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.to_record()) + "\n")
    _save_loop_state(session_dir, {"events_at_retrain": len(store.events)})
    _emit(
        {
            "iteration": record.iteration,
            "labeled_count": record.labeled_count,
            "overall_f1": record.overall_f1,
            "per_class_accuracy": record.per_class_accuracy,
        }
    )


@main.command()
@session_option
def metrics(session_dir: Path) -> None:
    """Print all iteration records as JSON lines."""
    for record in _load_records(session_dir):
        _emit(record.to_record())


@main.command("project")
@session_option
@click.option("--precomputed", type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path))
def project_cmd(session_dir: Path, precomputed, out) -> None:
    """Write 2D overview coordinates with per-point prediction error."""
    dataset = _load_dataset(session_dir)
    store = _open_store(session_dir, dataset)
    model = _load_model(session_dir)
    coords = None
    if precomputed is not None:
        try:
            coords = read_projection(precomputed)
        except DatasetError as exc:
            _fail("invalid projection file", problems=exc.problems)
    try:
        result = project(dataset, model=model, labels=store.state.current, precomputed=coords)
    except (ValueError, KeyError) as exc:
        _fail(str(exc.args[0]) if exc.args else str(exc))
    if out is not None:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["video_id", "x", "y", "error"])
            for vid in sorted(result.coords):
                x, y = result.coords[vid]
                writer.writerow([vid, repr(x), repr(y), repr(result.errors[vid])])
    else:
        for vid in sorted(result.coords):
            x, y = result.coords[vid]
            _emit({"video_id": vid, "x": x, "y": y, "error": result.errors[vid]})
    _emit({"points": len(result.coords), "out": str(out) if out else None})


@main.command("simulate")
@session_option
@click.option(
    "--strategy",
    required=True,
    type=click.Choice(["template", "uncertainty", "random"]),
)
@click.option("--target-f1", default=0.85, show_default=True)
@click.option("--batch-size", default=10, show_default=True)
@click.option("--max-labels", default=600, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--oracle", "oracle_path", type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), help="Write the curve as CSV.")
def simulate_cmd(
    session_dir: Path, strategy, target_f1, batch_size, max_labels, seed, oracle_path, out
) -> None:
    """Replay the labeling loop against a hidden oracle and report the curve."""
    dataset = _load_dataset(session_dir)
    if oracle_path is None:
        oracle_path = session_dir / ORACLE_FILE
        if not oracle_path.exists():
            _fail("no oracle labels; pass --oracle or create the session with synth")
    oracle = read_labels(oracle_path)
    try:
        config = SimulationConfig(
            strategy=strategy,
            oracle=oracle,
            target_f1=target_f1,
            batch_size=batch_size,
            max_labels=max_labels,
            seed=seed,
            train=TrainConfig(epochs=200, seed=seed),
        )
        result = simulate(dataset, config)
    except ValueError as exc:
        _fail(str(exc))
    if out is not None:
        class_ids = result.records[0].class_ids if result.records else ()
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iteration", "labeled_count", "f1"] + [f"acc_{c}" for c in class_ids]
            )
            for record in result.records:
                writer.writerow(
                    [record.iteration, record.labeled_count, repr(record.overall_f1)]
                    + [repr(record.per_class_accuracy[c]) for c in class_ids]
                )
    _emit(
        {
            "strategy": result.strategy,
            "reached": result.reached,
            "labels_to_target": result.labels_to_target,
            "total_labels": result.total_labels,
            "final_f1": result.curve[-1][1] if result.curve else None,
            "out": str(out) if out else None,
        }
    )


@main.command()
@session_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--min-support", default=2, show_default=True)
@click.option("--max-length", default=6, show_default=True)
@click.option("--max-gap", default=None, type=int)
@click.option("--threshold", default=32, show_default=True)
@click.option("--w", default=0.5, show_default=True)
def serve(session_dir: Path, host, port, min_support, max_length, max_gap, threshold, w) -> None:
    """Serve the HTTP API for the web client."""
    import uvicorn

    from .service import create_app

    app = create_app(build_session(session_dir, min_support, max_length, max_gap, threshold, w))
    uvicorn.run(app, host=host, port=port)


def build_session(
    session_dir: Path,
    min_support: int = 2,
    max_length: int = 6,
    max_gap: int | None = None,
    threshold: int = 32,
    w: float = 0.5,
):
    """Assemble the serving state from a session directory."""
    from .model import ModelLoop
    from .service import SessionState

    dataset = _load_dataset(session_dir)
    store = LabelStore.load(session_dir / LOG_FILE, dataset.class_ids, list(dataset.sequences))
    constraints = _constraints(min_support, 1, max_length, max_gap)
    loop = ModelLoop(dataset=dataset, store=store, threshold=threshold)
    oracle_path = session_dir / ORACLE_FILE
    if oracle_path.exists():
        loop.eval_labels = read_labels(oracle_path)
    loop.classifier = _load_model(session_dir)
    loop.records = _load_records(session_dir)
    loop_state = _load_loop_state(session_dir)
    loop._events_at_retrain = int(loop_state.get("events_at_retrain", 0))
    projection_path = session_dir / PROJECTION_FILE
    precomputed = read_projection(projection_path) if projection_path.exists() else None

    def persist_retrain() -> None:
        with open(session_dir / MODEL_FILE, "w", encoding="utf-8") as fh:
            json.dump(loop.classifier.to_record(), fh)
        with open(session_dir / METRICS_FILE, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(loop.records[-1].to_record()) + "\n")
        _save_loop_state(session_dir, {"events_at_retrain": len(store.events)})

    return SessionState(
        dataset=dataset,
        store=store,
        loop=loop,
        constraints=constraints,
        default_w=w,
        precomputed_projection=precomputed,
        on_retrain=persist_retrain,
    )


if __name__ == "__main__":
    main()
