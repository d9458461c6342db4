import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

import causeq.service
from causeq.service import create_app


def demo_stream(seed=0, n=30):
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n):
        t = 0.0
        for _ in range(5):
            t += rng.exponential(2.0)
            lines.append(json.dumps({"seq": f"s{i}", "type": "A", "t": round(t, 3)}))
            if rng.random() < 0.7:
                lines.append(json.dumps(
                    {"seq": f"s{i}", "type": "B", "t": round(t + rng.exponential(1.0), 3)}))
            if rng.random() < 0.3:
                lines.append(json.dumps(
                    {"seq": f"s{i}", "type": "C", "t": round(t + rng.exponential(3.0), 3)}))
    return "\n".join(lines)


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    app = create_app(data_dir=tmp_path_factory.mktemp("causeq"))
    return TestClient(app, raise_server_exceptions=False)


@pytest.fixture(scope="module")
def session(client):
    r = client.post("/datasets", json={"format": "jsonl", "content": demo_stream()})
    assert r.status_code == 201
    ds_id = r.json()["id"]
    r = client.post("/sessions", json={
        "dataset_id": ds_id,
        "query": {"include_events": ["A"]},
        "fit": {"alpha": 5.0, "max_iters": 50},
    })
    assert r.status_code == 201
    return ds_id, r.json()


def test_dataset_ingest_and_coverage(client):
    r = client.post("/datasets", json={"format": "jsonl", "content": demo_stream(seed=5)})
    assert r.status_code == 201
    body = r.json()
    assert body["vocabulary"] == ["A", "B", "C"]
    cov = client.get(f"/datasets/{body['id']}/coverage").json()["coverage"]
    assert cov[0]["type"] == "A" and cov[0]["rate"] == 1.0
    rates = [c["rate"] for c in cov]
    assert rates == sorted(rates, reverse=True)


def test_dataset_ingest_rejects_malformed(client):
    r = client.post("/datasets", json={"format": "jsonl", "content": '{"seq": "s"}'})
    assert r.status_code == 400


def test_session_happy_path(session):
    _, body = session
    assert body["diagnostics"][0]["iter"] == 0
    assert any(e["cause"] == "A" and e["effect"] == "B" for e in body["graph"]["edges"])


def test_session_empty_query_rejected(client, session):
    ds_id, _ = session
    r = client.post("/sessions", json={
        "dataset_id": ds_id,
        "query": {"include_events": ["A"], "exclude_events": ["B"],
                  "attribute_filters": [["age", "equals", 1]]},
    })
    assert r.status_code == 400
    assert "empty" in r.json()["detail"]


def test_graph_strength_filter_dominance(client, session):
    _, body = session
    sid = body["id"]
    r = client.get(f"/sessions/{sid}/graph", params={"strength_min": 1e9})
    assert r.status_code == 200
    assert r.json()["edges"] == []
    assert r.json()["nodes"]


def test_expand_returns_delta_and_completes(client, session):
    _, body = session
    sid = body["id"]
    r = client.get(f"/sessions/{sid}/graph", params={"outcome": "B"})
    causes_of_b = {e["cause"] for e in client.get(f"/sessions/{sid}/graph").json()["edges"]
                   if e["effect"] == "B"}
    r = client.post(f"/sessions/{sid}/expand", json={"event": "B"})
    assert r.status_code == 200
    # expanding an already-covered leaf again adds nothing new
    r2 = client.post(f"/sessions/{sid}/expand", json={"event": "B"})
    assert r2.json()["new_nodes"] == []


def test_feedback_contradiction_rejected(client, session):
    _, body = session
    sid = body["id"]
    r = client.post(f"/sessions/{sid}/feedback",
                    json={"confirmed": [["A", "B"]], "removed": [["A", "B"]]})
    assert r.status_code == 400


def test_feedback_unknown_type_rejected(client, session):
    _, body = session
    sid = body["id"]
    r = client.post(f"/sessions/{sid}/feedback", json={"confirmed": [["A", "Z"]]})
    assert r.status_code == 400


def test_refit_appends_diagnostics_and_updates_graph(client, session):
    _, body = session
    sid = body["id"]
    r = client.post(f"/sessions/{sid}/feedback", json={"confirmed": [["A", "B"]]})
    assert r.status_code == 200
    r = client.post(f"/sessions/{sid}/refit")
    assert r.status_code == 200
    out = r.json()
    assert [d["iter"] for d in out["diagnostics"]] == [0, 1]
    edge = next(e for e in out["graph"]["edges"]
                if e["cause"] == "A" and e["effect"] == "B")
    assert edge["confirmed"]
    assert set(out["layout"]) == {"positions", "depths", "circles", "stress", "crowded"}


def test_refit_conflict_while_in_flight(client, session):
    _, body = session
    sid = body["id"]
    sess = client.app.state.sessions[sid]
    assert sess.refit_lock.acquire(blocking=False)
    try:
        r = client.post(f"/sessions/{sid}/refit")
        assert r.status_code == 409
    finally:
        sess.refit_lock.release()
    assert client.post(f"/sessions/{sid}/refit").status_code == 200


def test_refit_is_atomic_on_failure(client, session, monkeypatch):
    _, body = session
    sid = body["id"]
    before = client.get(f"/sessions/{sid}/diagnostics").json()

    def boom(*args, **kwargs):
        raise RuntimeError("induced failure")

    monkeypatch.setattr(causeq.service, "refit_with_feedback", boom)
    r = client.post(f"/sessions/{sid}/refit")
    assert r.status_code == 500
    after = client.get(f"/sessions/{sid}/diagnostics").json()
    assert after == before  # no partial mutation


def test_layout_identical_for_unchanged_graph(client, session):
    _, body = session
    sid = body["id"]
    l1 = client.get(f"/sessions/{sid}/layout").json()
    l2 = client.get(f"/sessions/{sid}/layout").json()
    assert l1 == l2


def test_patterns_endpoint(client, session):
    _, body = session
    sid = body["id"]
    r = client.get(f"/sessions/{sid}/patterns",
                   params={"cause": "A", "effect": "B", "window": 3.0})
    assert r.status_code == 200
    out = r.json()
    assert set(out) == {"rows", "order", "groups", "aggregates", "columns",
                        "group_likelihood"}
    assert sum(out["groups"].values()) == len(out["rows"])
    r = client.get(f"/sessions/{sid}/patterns",
                   params={"cause": "A", "effect": "Z", "window": 3.0})
    assert r.status_code == 400


def test_path_flow_endpoint(client, session):
    _, body = session
    sid = body["id"]
    r = client.get(f"/sessions/{sid}/path-flow", params={"path": "A,B", "window": 3.0})
    assert r.status_code == 200
    steps = r.json()["steps"]
    assert steps[0]["from"] == "A" and steps[0]["to"] == "B"
    assert client.get(f"/sessions/{sid}/path-flow",
                      params={"path": "A", "window": 3.0}).status_code == 400


def test_snapshot_compare_revert_cycle(client, session):
    _, body = session
    sid = body["id"]
    snap1 = client.post(f"/sessions/{sid}/snapshot", json={}).json()["id"]
    r = client.post(f"/sessions/{sid}/revert", json={"iteration": 0})
    assert r.status_code == 200
    assert [d["iter"] for d in r.json()["diagnostics"]] == [0]
    snap2 = client.post(f"/sessions/{sid}/snapshot", json={}).json()["id"]
    listed = client.get("/snapshots").json()["snapshots"]
    assert [s["id"] for s in listed] == [snap1, snap2]
    r = client.get("/compare", params={"a": snap1, "b": snap2, "epsilon": 0.05})
    assert r.status_code == 200
    cells = r.json()["cells"]
    assert len(cells) == len(r.json()["types"]) ** 2
    cats = {c["category"] for c in cells}
    assert cats <= {"only_first", "only_second", "both_diff", "both_same", "neither"}
    assert client.get("/compare", params={"a": snap1, "b": "9999"}).status_code == 404


def test_revert_invalid_iteration(client, session):
    _, body = session
    sid = body["id"]
    assert client.post(f"/sessions/{sid}/revert",
                       json={"iteration": 99}).status_code == 400


def test_unknown_ids_404(client):
    assert client.get("/sessions/nope/graph").status_code == 404
    assert client.get("/datasets/nope/coverage").status_code == 404


def test_snapshot_stores_query_payload(client, session):
    _, body = session
    sid = body["id"]
    q = {"include_events": ["A"], "attribute_filters": [["age", "range", [50, 60]]]}
    snap_id = client.post(f"/sessions/{sid}/snapshot", json={"query": q}).json()["id"]
    listed = client.get("/snapshots").json()["snapshots"]
    stored = next(s for s in listed if s["id"] == snap_id)
    assert stored["query"]["include_events"] == ["A"]
    assert stored["query"]["attribute_filters"] == [["age", "range", [50, 60]]]
