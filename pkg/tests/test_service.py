"""HTTP service: endpoint contracts, error mapping, concurrency, recovery."""

import json
import threading

import pytest
from fastapi.testclient import TestClient

from semfeat.corpus import ingest, save_corpus
from semfeat.service import ServiceConfig, create_app

from .synth import MONTHS, homonym_corpus, homonym_records


@pytest.fixture(scope="module")
def corpus():
    return homonym_corpus(n_docs=100, seed=21)[0]


@pytest.fixture()
def client(tmp_path, corpus):
    config = ServiceConfig(corpus_path="unused", data_dir=str(tmp_path / "data"))
    app = create_app(config, corpus=corpus)
    with TestClient(app) as c:
        yield c


def make_session(client, **kwargs):
    payload = {"task": "demo", "auto_seed": True, "seed": 3}
    payload.update(kwargs)
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 200, resp.text
    return resp.json()


def put_months(client, sid, terms=None):
    terms = terms if terms is not None else [[m] for m in MONTHS]
    resp = client.put(f"/sessions/{sid}/dictionaries/months",
                      json={"name": "months", "terms": terms})
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestSessions:
    def test_create_then_get_roundtrips(self, client):
        view = make_session(client)
        got = client.get(f"/sessions/{view['id']}")
        assert got.status_code == 200
        assert got.json() == view

    def test_unknown_session_404(self, client):
        resp = client.get("/sessions/ghost")
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown_session"

    def test_label_roundtrip_increments_count(self, client):
        view = make_session(client)
        before = view["labels"]
        resp = client.post(f"/sessions/{view['id']}/labels",
                           json={"doc_id": "d00040", "label": 1})
        assert resp.status_code == 200
        assert resp.json()["labels"] == before + 1
        assert client.get(f"/sessions/{view['id']}").json()["labels"] == before + 1

    def test_label_validation_422(self, client):
        view = make_session(client)
        resp = client.post(f"/sessions/{view['id']}/labels",
                           json={"doc_id": "d00040", "label": 7})
        assert resp.status_code == 422

    def test_next_without_model_is_409_with_reason(self, client):
        view = make_session(client)
        resp = client.get(f"/sessions/{view['id']}/next",
                          params={"strategy": "uncertainty"})
        assert resp.status_code == 409
        body = resp.json()
        assert body["code"] == "model_missing"
        assert "retrain" in body["error"]

    def test_keyword_next_excludes_labeled(self, client):
        view = make_session(client)
        sid = view["id"]
        resp = client.get(f"/sessions/{sid}/next",
                          params={"strategy": "keyword", "query": "may", "count": 5})
        assert resp.status_code == 200
        doc_ids = resp.json()["doc_ids"]
        assert doc_ids
        client.post(f"/sessions/{sid}/labels", json={"doc_id": doc_ids[0], "label": 0})
        again = client.get(f"/sessions/{sid}/next",
                           params={"strategy": "keyword", "query": "may", "count": 5})
        assert doc_ids[0] not in again.json()["doc_ids"]

    def test_retrain_then_uncertainty_and_status(self, client):
        view = make_session(client)
        sid = view["id"]
        resp = client.post(f"/sessions/{sid}/retrain", json={"scheme": "bow-tfidf"})
        assert resp.status_code == 200
        assert resp.json()["model_trained"] is True
        nxt = client.get(f"/sessions/{sid}/next",
                         params={"strategy": "uncertainty", "count": 3})
        assert nxt.status_code == 200
        assert len(nxt.json()["doc_ids"]) == 3
        status = client.get(f"/sessions/{sid}/status")
        assert status.status_code == 200
        assert status.json()["converged"] is True

    def test_status_before_training_409(self, client):
        view = make_session(client)
        resp = client.get(f"/sessions/{view['id']}/status")
        assert resp.status_code == 409

    def test_blindness_after_retrain(self, client):
        view = make_session(client)
        sid = view["id"]
        client.post(f"/sessions/{sid}/retrain", json={"scheme": "bow-tfidf"})
        resp = client.get(f"/sessions/{sid}/blindness")
        assert resp.status_code == 200
        assert resp.json()["training_error_rate"] == 0.0


class TestDictionaryEndpoints:
    def test_upsert_and_delete(self, client):
        sid = make_session(client)["id"]
        view = put_months(client, sid)
        assert view["dictionaries"][0]["id"] == "months"
        assert view["dictionaries"][0]["context_model_stale"] is True
        resp = client.delete(f"/sessions/{sid}/dictionaries/months")
        assert resp.status_code == 200
        assert resp.json()["dictionaries"] == []

    def test_invalid_dictionary_422(self, client):
        sid = make_session(client)["id"]
        resp = client.put(f"/sessions/{sid}/dictionaries/bad",
                          json={"name": "bad", "terms": [["May"]]})
        assert resp.status_code == 422
        assert resp.json()["code"] == "invalid_dictionary"

    def test_delete_unknown_404(self, client):
        sid = make_session(client)["id"]
        resp = client.delete(f"/sessions/{sid}/dictionaries/ghost")
        assert resp.status_code == 404

    def test_train_context_then_calibrate_then_contexts(self, client):
        sid = make_session(client)["id"]
        put_months(client, sid)
        resp = client.post(f"/sessions/{sid}/dictionaries/months/train-context",
                           json={})
        assert resp.status_code == 200
        body = resp.json()
        assert body["positives"] > 0 and body["negatives"] > 0
        resp = client.post(f"/sessions/{sid}/dictionaries/months/calibrate",
                           json={"target": 1.0})
        assert resp.status_code == 200
        cal = resp.json()
        assert 0.0 < cal["gamma"] <= 1.0
        assert cal["mean_smooth_matches"] <= 1.0 + 1e-9
        resp = client.get(f"/sessions/{sid}/dictionaries/months/contexts",
                          params={"term": "may", "limit": 10})
        assert resp.status_code == 200
        rows = resp.json()["rows"]
        assert rows
        probs = [r["probability"] for r in rows]
        assert probs == sorted(probs, reverse=True)

    def test_contexts_trigger_percent_counts_full_occurrence_list(self, client):
        sid = make_session(client)["id"]
        put_months(client, sid)
        client.post(f"/sessions/{sid}/dictionaries/months/train-context", json={})
        all_rows = client.get(f"/sessions/{sid}/dictionaries/months/contexts",
                              params={"term": "may", "limit": 0}).json()
        for gamma in (1e-6, 0.01, 0.5, 0.9):
            resp = client.get(f"/sessions/{sid}/dictionaries/months/contexts",
                              params={"term": "may", "limit": 3, "gamma": gamma})
            body = resp.json()
            expected = 100.0 * sum(1 for r in all_rows["rows"]
                                   if r["probability"] >= gamma) / all_rows["occurrences"]
            assert body["trigger_percent"] == pytest.approx(expected)

    def test_contexts_before_training_409(self, client):
        sid = make_session(client)["id"]
        put_months(client, sid)
        resp = client.get(f"/sessions/{sid}/dictionaries/months/contexts",
                          params={"term": "may"})
        assert resp.status_code == 409

    def test_suggestions(self, client):
        sid = make_session(client)["id"]
        put_months(client, sid, terms=[["january"], ["february"], ["march"]])
        client.post(f"/sessions/{sid}/dictionaries/months/train-context", json={})
        resp = client.get(f"/sessions/{sid}/dictionaries/months/suggestions",
                          params={"k": 10})
        assert resp.status_code == 200
        entries = resp.json()["entries"]
        assert entries
        suggested = {tuple(e["term"]) for e in entries}
        assert ("january",) not in suggested


class TestMetricsAndDocs:
    def test_metrics_three_schemes(self, client, corpus):
        from semfeat.dictionary import Dictionary, corpus_matches
        sid = make_session(client)["id"]
        put_months(client, sid)
        client.post(f"/sessions/{sid}/dictionaries/months/train-context", json={})
        # calibrate to the class-relevant match rate, not the noise-inflated mean
        months = Dictionary.from_texts("months", "months", MONTHS)
        matches = corpus_matches(corpus, months)
        target = sum(ml.count for ml in matches.values()
                     if corpus.doc(ml.doc_id).label == 1) / len(corpus)
        client.post(f"/sessions/{sid}/dictionaries/months/calibrate",
                    json={"target": target})
        reports = {}
        for scheme in ("bow-tfidf", "dictionaries-literal", "dictionaries-smoothed"):
            resp = client.get(f"/sessions/{sid}/metrics", params={"scheme": scheme})
            assert resp.status_code == 200, resp.text
            body = resp.json()
            assert 0.0 <= body["auroc"] <= 1.0
            assert body["pr_curve"]
            reports[scheme] = body
        assert reports["dictionaries-smoothed"]["auroc"] >= \
            reports["dictionaries-literal"]["auroc"]

    def test_metrics_unknown_scheme_422(self, client):
        sid = make_session(client)["id"]
        resp = client.get(f"/sessions/{sid}/metrics", params={"scheme": "magic"})
        assert resp.status_code == 422

    def test_doc_endpoint(self, client):
        resp = client.get("/docs/d00000")
        assert resp.status_code == 200
        body = resp.json()
        assert body["id"] == "d00000"
        assert body["tokens"]
        resp = client.get("/docs/ghost")
        assert resp.status_code == 404


class TestConcurrency:
    def test_concurrent_labels_all_applied_in_total_order(self, client):
        sid = make_session(client, auto_seed=False)["id"]
        doc_ids = [f"d{i:05d}" for i in range(40)]
        errors = []

        def worker(ids):
            for did in ids:
                r = client.post(f"/sessions/{sid}/labels",
                                json={"doc_id": did, "label": 1})
                if r.status_code != 200:
                    errors.append(r.text)

        threads = [threading.Thread(target=worker, args=(doc_ids[i::4],))
                   for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        view = client.get(f"/sessions/{sid}").json()
        assert view["labels"] == 40
        assert view["events"] == 41  # create + 40 labels
        engine = client.app.state.engine
        seqs = [e.seq for e in engine.sessions[sid].events]
        assert seqs == list(range(41))


class TestRecovery:
    def test_restart_preserves_acknowledged_mutations(self, tmp_path, corpus):
        config = ServiceConfig(corpus_path="unused", data_dir=str(tmp_path / "data"))
        with TestClient(create_app(config, corpus=corpus)) as client:
            sid = make_session(client)["id"]
            put_months(client, sid)
            client.post(f"/sessions/{sid}/labels", json={"doc_id": "d00050", "label": 1})
            client.post(f"/sessions/{sid}/retrain", json={"scheme": "bow-tfidf"})
            before = client.get(f"/sessions/{sid}").json()
        # new process: fresh app over the same data dir
        with TestClient(create_app(config, corpus=corpus)) as client2:
            after = client2.get(f"/sessions/{sid}").json()
            assert after == before
            listed = client2.get("/sessions").json()["sessions"]
            assert {"id": sid, "task": "demo"} in listed


def test_config_validation(tmp_path):
    bad = ServiceConfig(corpus_path="x", data_dir=str(tmp_path), epsilon=2.0)
    with pytest.raises(Exception):
        bad.validate()


def test_request_size_limit(tmp_path, corpus):
    config = ServiceConfig(corpus_path="unused", data_dir=str(tmp_path / "data"),
                           max_request_bytes=100)
    with TestClient(create_app(config, corpus=corpus)) as client:
        resp = client.post("/sessions", json={"task": "x" * 500})
        assert resp.status_code == 413


def test_app_loads_corpus_from_disk(tmp_path):
    corpus = ingest(homonym_records(20, seed=2))
    corpus_path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, corpus_path)
    config = ServiceConfig(corpus_path=str(corpus_path),
                           data_dir=str(tmp_path / "data"))
    with TestClient(create_app(config)) as client:
        assert client.get("/docs/d00000").status_code == 200
