"""HTTP service exposing the labeling workflow.

One process serves one session: a dataset, its label store, the retrain
loop, and caches for mined templates and cluster partitions.  Reads are
concurrent; mutations (labeling, resolving, retraining) serialize through a
non-blocking writer lock and answer 503 with Retry-After when busy, so
clients can retry rather than block a long retrain.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .labels import SOURCE_MANUAL, LabelStore
from .mindl import BandParams, ClusterPartition, assign_roles, cluster
from .mining import (
    MiningConstraints,
    Pattern,
    aggregate,
    leftmost_embedding,
    mine_coverage,
    search_template,
    template_metrics,
)
from .model import ModelLoop, TrainConfig, feature_matrix, project
from .similarity import SimilarityWeights, retrieve
from .types import Dataset


@dataclass
class SessionState:
    """Everything one serving process knows, plus its caches."""

    dataset: Dataset
    store: LabelStore
    loop: ModelLoop
    constraints: MiningConstraints
    default_w: float = 0.5
    precomputed_projection: dict[str, tuple[float, float]] | None = None
    coverage: dict[str, frozenset[str]] | None = None
    partitions: dict[tuple, ClusterPartition] = field(default_factory=dict)
    write_lock: threading.Lock = field(default_factory=threading.Lock)
    # Called after every successful retrain so a session directory can
    # persist the model and metrics the same way the CLI does.
    on_retrain: Callable[[], None] | None = None

    def template_coverage(self) -> dict[str, frozenset[str]]:
        # Coverage is label-independent, so one mining pass per session.
        if self.coverage is None:
            self.coverage = mine_coverage(self.dataset, self.constraints)
        return self.coverage

    def partition_for(
        self, symbols: str, alpha: float, lam: float, use_lsh: bool
    ) -> ClusterPartition:
        key = (symbols, alpha, lam, use_lsh)
        if key not in self.partitions:
            coverage = self.template_coverage()
            if symbols in coverage:
                member_ids = sorted(coverage[symbols])
            else:
                symbol_map = self.dataset.symbol_map()
                member_ids = [
                    vid
                    for vid in self.dataset.sequences
                    if leftmost_embedding(symbols, symbol_map[vid], self.constraints.max_gap)
                    is not None
                ]
            if not member_ids:
                raise KeyError(symbols)
            symbol_map = self.dataset.symbol_map()
            pairs = [(vid, symbol_map[vid]) for vid in member_ids]
            self.partitions[key] = cluster(
                pairs,
                symbols,
                alpha=alpha,
                lam=lam,
                lsh=BandParams() if use_lsh else None,
            )
        return self.partitions[key]


def make_session(
    dataset: Dataset,
    constraints: MiningConstraints | None = None,
    threshold: int = 32,
    default_w: float = 0.5,
    train_config: TrainConfig | None = None,
    labels_path=None,
    precomputed_projection: dict[str, tuple[float, float]] | None = None,
    eval_labels: Mapping[str, str] | None = None,
) -> SessionState:
    store = LabelStore(dataset.class_ids, list(dataset.sequences), path=labels_path)
    if dataset.seed_labels:
        for class_id in sorted(set(dataset.seed_labels.values())):
            ids = [vid for vid, c in dataset.seed_labels.items() if c == class_id]
            store.apply_labels(ids, class_id, source="seed", iteration=0, actor="ingest")
    loop = ModelLoop(
        dataset=dataset,
        store=store,
        threshold=threshold,
        config=train_config or TrainConfig(),
        eval_labels=eval_labels,
    )
    return SessionState(
        dataset=dataset,
        store=store,
        loop=loop,
        constraints=constraints or MiningConstraints(min_support=2, max_length=6),
        default_w=default_w,
        precomputed_projection=precomputed_projection,
    )


class RetrieveRequest(BaseModel):
    anchors: list[str]
    w: float | None = Field(default=None, ge=0.0, le=1.0)
    top_k: int | None = Field(default=None, ge=1)


class LabelRequest(BaseModel):
    ids: list[str]
    class_id: str = Field(alias="class")
    source: str = SOURCE_MANUAL
    actor: str = "user"

    model_config = {"populate_by_name": True}


class ResolveRequest(BaseModel):
    video_id: str
    class_id: str = Field(alias="class")
    actor: str = "user"

    model_config = {"populate_by_name": True}


class RetrainRequest(BaseModel):
    force: bool = False


def _template_record(session: SessionState, pattern: Pattern, metrics) -> dict:
    return {
        "symbols": pattern.symbols,
        "support": pattern.support,
        "length": len(pattern.symbols),
        "class_counts": metrics.class_counts,
        "purity": metrics.purity,
        "accuracy": metrics.accuracy,
        "unlabeled_count": metrics.unlabeled_count,
        "newly_labeled_counts": metrics.newly_labeled_counts,
    }


def _busy_response() -> JSONResponse:
    return JSONResponse(
        status_code=503,
        content={"error": "another mutation is in progress; retry shortly"},
        headers={"Retry-After": "1"},
    )


def create_app(session: SessionState) -> FastAPI:
    app = FastAPI(title="seqlab", version="0.1.0")
    app.state.session = session

    def current_templates() -> list[tuple[Pattern, object]]:
        coverage = session.template_coverage()
        state = session.store.state
        labels = state.current
        newly = {
            vid: labels[vid]
            for vid, it in state.iterations.items()
            if it > 0 and vid in labels
        }
        model = session.loop.classifier
        predictions = None
        if model is not None:
            ids = list(session.dataset.sequences)
            predictions = dict(
                zip(ids, model.predict(feature_matrix(ids, session.dataset)))
            )
        out = []
        for symbols in sorted(coverage, key=lambda s: (len(s), s)):
            covered = coverage[symbols]
            pattern = Pattern(symbols=symbols, support=len(covered))
            metrics = template_metrics(
                session.dataset,
                pattern,
                labels=labels,
                predictions=predictions,
                newly_labeled=newly,
                covered_ids=covered,
            )
            out.append((pattern, metrics))
        return out

    @app.get("/meta")
    def meta() -> dict:
        state = session.store.state
        return {
            "classes": [
                {"class_id": c.class_id, "name": c.name, "color": c.color}
                for c in session.dataset.classes
            ],
            "alphabet": list(session.dataset.registry.alphabet),
            "event_names": {t.code: t.name for t in session.dataset.registry},
            "video_count": len(session.dataset.sequences),
            "labeled_count": len(state.current),
            "conflict_count": len(state.conflicts),
            "iteration": session.loop.iteration,
            "threshold": session.loop.threshold,
            "new_since_retrain": session.loop.new_since_retrain,
            "default_w": session.default_w,
            "has_embeddings": bool(session.dataset.embeddings),
        }

    @app.get("/templates")
    def templates(
        sort: str = "purity",
        order: str = "desc",
        min_support: int | None = None,
        min_degree: int | None = None,
        max_degree: int | None = None,
        aggregate_by: str | None = None,
        search: str | None = None,
    ):
        if search is not None:
            try:
                pattern, metrics = search_template(
                    search,
                    session.dataset,
                    constraints=session.constraints,
                    labels=session.store.state.current,
                )
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            return {"templates": [_template_record(session, pattern, metrics)]}
        entries = current_templates()
        if min_support is not None:
            entries = [e for e in entries if e[0].support >= min_support]
        if min_degree is not None:
            entries = [e for e in entries if len(e[0].symbols) >= min_degree]
        if max_degree is not None:
            entries = [e for e in entries if len(e[0].symbols) <= max_degree]
        keys = {
            "purity": lambda e: e[1].purity,
            "unlabeled": lambda e: e[1].unlabeled_count,
            "accuracy": lambda e: e[1].accuracy if e[1].accuracy is not None else -1.0,
            "support": lambda e: e[0].support,
        }
        if sort not in keys:
            raise HTTPException(status_code=400, detail=f"unknown sort key {sort!r}")
        if order not in ("asc", "desc"):
            raise HTTPException(status_code=400, detail=f"unknown order {order!r}")
        entries.sort(key=lambda e: e[0].symbols)
        entries.sort(key=keys[sort], reverse=(order == "desc"))
        records = [_template_record(session, p, m) for p, m in entries]
        if aggregate_by is None:
            return {"templates": records}
        patterns = [p for p, _ in entries]
        try:
            grouped = aggregate(patterns, aggregate_by)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        by_symbols = {r["symbols"]: r for r in records}
        if aggregate_by == "prefix":

            def node_payload(node) -> dict:
                return {
                    "prefix": node.symbols,
                    "template": by_symbols.get(node.symbols),
                    "children": [node_payload(c) for c in node.children],
                }

            return {"aggregate": "prefix", "groups": [node_payload(n) for n in grouped]}
        payload = [
            {"key": key, "templates": [by_symbols[p.symbols] for p in group]}
            for key, group in grouped.items()
        ]
        return {"aggregate": aggregate_by, "groups": payload}

    @app.get("/templates/{symbols}/clusters")
    def template_clusters(
        symbols: str,
        alpha: float = 0.8,
        lam: float = 0.0,
        use_lsh: bool = False,
    ):
        try:
            partition = session.partition_for(symbols, alpha, lam, use_lsh)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no videos match {symbols!r}")
        clusters_payload = []
        for c in partition.clusters:
            members = []
            for vid, script in c.members:
                seq = session.dataset.sequences[vid]
                members.append(
                    {
                        "video_id": vid,
                        "edit_cost": script.cost,
                        "roles": assign_roles(seq, c),
                    }
                )
            clusters_payload.append(
                {
                    "representative": c.representative,
                    "member_ids": list(c.member_ids),
                    "members": members,
                }
            )
        return {
            "seed_template": symbols,
            "alpha": partition.alpha,
            "lam": partition.lam,
            "total_dl": partition.total_dl,
            "clusters": clusters_payload,
        }

    @app.get("/videos")
    def videos(
        template: str | None = None,
        cluster_index: int | None = None,
        labeled: bool | None = None,
        alpha: float = 0.8,
        lam: float = 0.0,
    ):
        state = session.store.state
        symbol_map = session.dataset.symbol_map()
        roles_by_id: dict[str, list[str]] = {}
        if template is not None:
            if cluster_index is not None:
                try:
                    partition = session.partition_for(template, alpha, lam, False)
                except KeyError:
                    raise HTTPException(status_code=404, detail=f"no videos match {template!r}")
                if not 0 <= cluster_index < len(partition.clusters):
                    raise HTTPException(status_code=404, detail="cluster index out of range")
                chosen = partition.clusters[cluster_index]
                ids = list(chosen.member_ids)
                roles_by_id = {
                    vid: assign_roles(session.dataset.sequences[vid], chosen) for vid in ids
                }
            else:
                ids = [
                    vid
                    for vid in session.dataset.sequences
                    if leftmost_embedding(
                        template, symbol_map[vid], session.constraints.max_gap
                    )
                    is not None
                ]
        else:
            ids = list(session.dataset.sequences)
        if labeled is not None:
            ids = [vid for vid in ids if (vid in state.current) == labeled]
        payload = []
        for vid in ids:
            seq = session.dataset.sequences[vid]
            record = {
                "video_id": vid,
                "symbols": symbol_map[vid],
                "duration": seq.duration,
                "thumbnail": seq.thumbnail,
                "events": [
                    {"code": e.code, "t_start": e.t_start, "t_end": e.t_end}
                    for e in seq.events
                ],
                "label": None,
            }
            if vid in state.current:
                record["label"] = {
                    "class": state.current[vid],
                    "source": state.sources[vid],
                    "iteration": state.iterations[vid],
                }
            if vid in roles_by_id:
                record["roles"] = roles_by_id[vid]
            payload.append(record)
        return {"videos": payload}

    @app.post("/retrieve")
    def retrieve_endpoint(request: RetrieveRequest):
        state = session.store.state
        unlabeled = [vid for vid in session.dataset.sequences if vid not in state.current]
        weights = SimilarityWeights(
            w=session.default_w if request.w is None else request.w
        )
        try:
            results = retrieve(
                request.anchors, unlabeled, session.dataset, weights, request.top_k
            )
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "w": weights.w,
            "results": [
                {
                    "video_id": r.video_id,
                    "sim_total": r.sim_total,
                    "sim_e": r.sim_e,
                    "sim_v": r.sim_v,
                    "best_anchor_id": r.best_anchor_id,
                }
                for r in results
            ],
        }

    @app.post("/labels")
    def post_labels(request: LabelRequest):
        if not session.write_lock.acquire(blocking=False):
            return _busy_response()
        try:
            iteration = 0 if request.source == "seed" else session.loop.iteration + 1
            try:
                applied, conflicts = session.store.apply_labels(
                    request.ids,
                    request.class_id,
                    source=request.source,
                    iteration=iteration,
                    actor=request.actor,
                )
            except KeyError as exc:
                raise HTTPException(status_code=400, detail=str(exc.args[0]))
            state = session.store.state
            return {
                "applied": applied,
                "conflicts_raised": sorted(conflicts),
                "labeled_count": len(state.current),
                "conflict_count": len(state.conflicts),
                "iteration": iteration,
            }
        finally:
            session.write_lock.release()

    @app.post("/labels/resolve")
    def post_resolve(request: ResolveRequest):
        if not session.write_lock.acquire(blocking=False):
            return _busy_response()
        try:
            try:
                state = session.store.resolve_conflict(
                    request.video_id, request.class_id, actor=request.actor
                )
            except KeyError as exc:
                raise HTTPException(status_code=400, detail=str(exc.args[0]))
            except ValueError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return {
                "video_id": request.video_id,
                "class": state.current[request.video_id],
                "conflict_count": len(state.conflicts),
            }
        finally:
            session.write_lock.release()

    @app.get("/labels/history")
    def labels_history(video_id: str | None = None):
        events = session.store.history(video_id)
        return {"events": [e.to_record() for e in events]}

    @app.post("/retrain")
    def post_retrain(request: RetrainRequest):
        if not session.write_lock.acquire(blocking=False):
            return _busy_response()
        try:
            try:
                outcome = session.loop.maybe_retrain(force=request.force)
            except ValueError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            if outcome is None:
                return JSONResponse(
                    status_code=409,
                    content={
                        "error": "threshold not reached",
                        "new_since_retrain": session.loop.new_since_retrain,
                        "threshold": session.loop.threshold,
                    },
                )
            _, record = outcome
            if session.on_retrain is not None:
                session.on_retrain()
            return record.to_record()
        finally:
            session.write_lock.release()

    @app.get("/metrics")
    def metrics():
        return {
            "iteration": session.loop.iteration,
            "threshold": session.loop.threshold,
            "new_since_retrain": session.loop.new_since_retrain,
            "records": [r.to_record() for r in session.loop.records],
        }

    @app.get("/projection")
    def projection():
        state = session.store.state
        try:
            result = project(
                session.dataset,
                model=session.loop.classifier,
                labels=state.current,
                precomputed=session.precomputed_projection,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        points = []
        for vid in sorted(result.coords):
            x, y = result.coords[vid]
            points.append(
                {
                    "video_id": vid,
                    "x": x,
                    "y": y,
                    "error": result.errors[vid],
                    "label": state.current.get(vid),
                    "iteration": state.iterations.get(vid),
                }
            )
        return {"points": points}

    return app
