"""HTTP endpoint contracts covered with the in-process test client."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from seqlab.mining import MiningConstraints
from seqlab.model import TrainConfig
from seqlab.service import create_app, make_session

from conftest import dataset_from_strings


def make_client(threshold: int = 4) -> TestClient:
    strings = {
        "v0": "ABAB",
        "v1": "ABAB",
        "v2": "ABBA",
        "v3": "CDCD",
        "v4": "CDDC",
        "v5": "CDCD",
        "v6": "ABCD",
        "v7": "DCBA",
    }
    embeddings = {vid: [1.0 + i, 2.0 - i % 3, 0.5] for i, vid in enumerate(strings)}
    dataset = dataset_from_strings(
        strings,
        embeddings=embeddings,
        class_ids=["x", "y"],
        seed_labels={"v0": "x", "v3": "y"},
    )
    session = make_session(
        dataset,
        constraints=MiningConstraints(min_support=2, min_length=1, max_length=4),
        threshold=threshold,
        train_config=TrainConfig(epochs=40),
    )
    return TestClient(create_app(session))


def test_meta_reports_session_shape():
    client = make_client()
    meta = client.get("/meta").json()
    assert meta["video_count"] == 8
    assert meta["labeled_count"] == 2
    assert meta["conflict_count"] == 0
    assert meta["iteration"] == 0
    assert meta["has_embeddings"] is True
    assert [c["class_id"] for c in meta["classes"]] == ["x", "y"]
    assert meta["alphabet"] == ["A", "B", "C", "D"]


def test_templates_sorting_and_filters():
    client = make_client()
    body = client.get("/templates", params={"sort": "support", "order": "desc"}).json()
    supports = [t["support"] for t in body["templates"]]
    assert supports == sorted(supports, reverse=True)
    body = client.get("/templates", params={"sort": "purity", "order": "asc"}).json()
    purities = [t["purity"] for t in body["templates"]]
    assert purities == sorted(purities)
    filtered = client.get("/templates", params={"min_support": 3}).json()["templates"]
    assert all(t["support"] >= 3 for t in filtered)
    by_degree = client.get(
        "/templates", params={"min_degree": 2, "max_degree": 2}
    ).json()["templates"]
    assert all(t["length"] == 2 for t in by_degree)
    assert client.get("/templates", params={"sort": "nope"}).status_code == 400
    assert client.get("/templates", params={"order": "sideways"}).status_code == 400


def test_templates_search_and_aggregate():
    client = make_client()
    found = client.get("/templates", params={"search": "ABAB"}).json()["templates"]
    assert len(found) == 1 and found[0]["support"] == 2
    assert client.get("/templates", params={"search": "AZ"}).status_code == 400
    grouped = client.get("/templates", params={"aggregate_by": "degree"}).json()
    assert grouped["aggregate"] == "degree"
    assert all("templates" in g for g in grouped["groups"])
    prefix = client.get("/templates", params={"aggregate_by": "prefix"}).json()
    assert prefix["aggregate"] == "prefix"
    assert all("prefix" in g for g in prefix["groups"])


def test_cluster_endpoint_roles_and_404():
    client = make_client()
    body = client.get("/templates/AB/clusters").json()
    assert body["seed_template"] == "AB"
    assert body["total_dl"] > 0
    ids = [vid for c in body["clusters"] for vid in c["member_ids"]]
    assert sorted(ids) == ["v0", "v1", "v2", "v6"]
    for c in body["clusters"]:
        for member in c["members"]:
            assert len(member["roles"]) == len(
                client.app.state.session.dataset.symbols(member["video_id"])
            )
    assert client.get("/templates/ZZZZ/clusters").status_code == 404


def test_videos_filtering():
    client = make_client()
    everything = client.get("/videos").json()["videos"]
    assert len(everything) == 8
    labeled = client.get("/videos", params={"labeled": True}).json()["videos"]
    assert {v["video_id"] for v in labeled} == {"v0", "v3"}
    assert labeled[0]["label"]["source"] == "seed"
    matching = client.get("/videos", params={"template": "AB"}).json()["videos"]
    assert {v["video_id"] for v in matching} == {"v0", "v1", "v2", "v6"}
    in_cluster = client.get(
        "/videos", params={"template": "AB", "cluster_index": 0}
    ).json()["videos"]
    assert all("roles" in v for v in in_cluster)
    assert (
        client.get("/videos", params={"template": "AB", "cluster_index": 99}).status_code
        == 404
    )


def test_retrieve_endpoint_excludes_labeled():
    client = make_client()
    body = client.post("/retrieve", json={"anchors": ["v0"], "w": 1.0}).json()
    ids = [r["video_id"] for r in body["results"]]
    assert "v0" not in ids and "v3" not in ids
    totals = [r["sim_total"] for r in body["results"]]
    assert totals == sorted(totals, reverse=True)
    assert body["w"] == 1.0
    top = client.post("/retrieve", json={"anchors": ["v0"], "w": 1.0, "top_k": 2}).json()
    assert len(top["results"]) == 2
    assert client.post("/retrieve", json={"anchors": []}).status_code == 400
    assert client.post("/retrieve", json={"anchors": ["ghost"]}).status_code == 400


def test_label_resolve_flow_and_conflicts():
    client = make_client()
    done = client.post("/labels", json={"ids": ["v1", "v2"], "class": "x"}).json()
    assert done["applied"] == 2
    assert done["conflicts_raised"] == []
    assert done["labeled_count"] == 4
    again = client.post("/labels", json={"ids": ["v1"], "class": "y"}).json()
    assert again["conflicts_raised"] == ["v1"]
    assert again["conflict_count"] == 1
    resolved = client.post(
        "/labels/resolve", json={"video_id": "v1", "class": "x"}
    ).json()
    assert resolved["class"] == "x"
    assert resolved["conflict_count"] == 0
    assert (
        client.post("/labels/resolve", json={"video_id": "v2", "class": "x"}).status_code
        == 409
    )
    assert (
        client.post("/labels", json={"ids": ["ghost"], "class": "x"}).status_code == 400
    )
    history = client.get("/labels/history", params={"video_id": "v1"}).json()["events"]
    assert [e["class"] for e in history] == ["x", "y", "x"]
    assert history[-1]["resolves"] is True


def test_retrain_threshold_and_metrics():
    client = make_client(threshold=4)
    below = client.post("/retrain", json={})
    assert below.status_code == 409
    assert below.json()["new_since_retrain"] == 0
    client.post("/labels", json={"ids": ["v1", "v6"], "class": "x"})
    client.post("/labels", json={"ids": ["v4", "v5"], "class": "y"})
    done = client.post("/retrain", json={})
    assert done.status_code == 200
    record = done.json()
    assert record["iteration"] == 1
    assert record["labeled_count"] == 6
    assert 0.0 <= record["overall_f1"] <= 1.0
    metrics = client.get("/metrics").json()
    assert metrics["iteration"] == 1
    assert len(metrics["records"]) == 1
    forced = client.post("/retrain", json={"force": True})
    assert forced.status_code == 200
    assert client.get("/metrics").json()["iteration"] == 2


def test_labels_carry_loop_iteration():
    client = make_client(threshold=2)
    client.post("/labels", json={"ids": ["v1", "v2"], "class": "x"})
    client.post("/retrain", json={})
    body = client.post("/labels", json={"ids": ["v4"], "class": "y"}).json()
    assert body["iteration"] == 2  # loop advanced, labels stamp the next one
    videos = client.get("/videos", params={"labeled": True}).json()["videos"]
    stamped = {v["video_id"]: v["label"]["iteration"] for v in videos}
    assert stamped["v4"] == 2
    assert stamped["v1"] == 1


def test_projection_endpoint():
    client = make_client()
    points = client.get("/projection").json()["points"]
    assert len(points) == 8
    assert all(set(p) >= {"video_id", "x", "y", "error", "label"} for p in points)
    labeled = {p["video_id"]: p for p in points}
    assert labeled["v0"]["label"] == "x"
    assert labeled["v1"]["label"] is None


def test_write_lock_returns_503_when_busy():
    client = make_client()
    session = client.app.state.session
    assert session.write_lock.acquire()
    try:
        response = client.post("/labels", json={"ids": ["v1"], "class": "x"})
        assert response.status_code == 503
        assert response.headers["retry-after"] == "1"
        assert client.post("/retrain", json={"force": True}).status_code == 503
        assert (
            client.post(
                "/labels/resolve", json={"video_id": "v1", "class": "x"}
            ).status_code
            == 503
        )
    finally:
        session.write_lock.release()
    assert client.post("/labels", json={"ids": ["v1"], "class": "x"}).status_code == 200


def test_cluster_cache_is_reused():
    client = make_client()
    session = client.app.state.session
    client.get("/templates/AB/clusters")
    first = dict(session.partitions)
    client.get("/templates/AB/clusters")
    assert dict(session.partitions) == first
    client.get("/templates/AB/clusters", params={"alpha": 0.5})
    assert len(session.partitions) == len(first) + 1
