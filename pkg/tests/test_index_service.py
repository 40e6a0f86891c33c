"""Retrieval indices and the HTTP query service."""
import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from qseek import retrieval
from qseek.errors import StaleIndexError, ValidationError
from qseek.head import init_head, save_checkpoint
from qseek.indexing import build_index_from_files, load_index, query
from qseek.service import load_service_state, make_server
from qseek.synthetic import SyntheticSpec, generate_corpus, load_fixture_bundle, write_fixture_bundle


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    spec = SyntheticSpec(
        train_interviews=1, dev_interviews=1, test_interviews=2,
        segments_per_interview=2, seed=9,
    )
    write_fixture_bundle(generate_corpus(spec), out)
    return load_fixture_bundle(out)


@pytest.fixture(scope="module")
def checkpoint(bundle, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "head.ckpt"
    params = init_head(bundle.features[(bundle.records[0].interview_id, 0)].shape[1], 32, seed=0)
    save_checkpoint(params, step=0, path=path)
    return path


@pytest.fixture(scope="module")
def indices_dir(bundle, checkpoint, tmp_path_factory):
    out = tmp_path_factory.mktemp("indices")
    provider = bundle.speech_provider()
    for record in bundle.split_records("test"):
        manifest = bundle.root / "interviews" / f"{record.interview_id}.json"
        build_index_from_files(manifest, checkpoint, provider, 14, out / f"{record.interview_id}.idx")
    return out


class TestIndex:
    def test_small_interview_single_window(self, bundle, checkpoint, tmp_path):
        record = bundle.split_records("test")[0]
        provider = bundle.speech_provider()
        manifest = bundle.root / "interviews" / f"{record.interview_id}.json"
        out = tmp_path / "one.idx"
        index = build_index_from_files(manifest, checkpoint, provider, 14, out)
        assert index.n_chunks == record.n_chunks
        loaded = load_index(out)
        assert loaded.interview_id == record.interview_id
        assert loaded.window == 14
        np.testing.assert_allclose(loaded.embeddings, index.embeddings, atol=0)
        assert loaded.chunk_times == [(c.start_s, c.end_s) for c in record.chunks]

    def test_rebuild_is_byte_identical(self, bundle, checkpoint, tmp_path):
        record = bundle.split_records("test")[0]
        provider = bundle.speech_provider()
        manifest = bundle.root / "interviews" / f"{record.interview_id}.json"
        blobs = []
        for run in range(2):
            out = tmp_path / f"{run}.idx"
            build_index_from_files(manifest, checkpoint, provider, 14, out)
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_manifest_edited_after_cache_is_stale(self, bundle, checkpoint, tmp_path):
        record = bundle.split_records("test")[0]
        manifest = bundle.root / "interviews" / f"{record.interview_id}.json"
        edited = json.loads(manifest.read_text())
        last_end = edited["chunks"][-1]["end_s"]
        edited["chunks"].append({"start_s": last_end + 1.0, "end_s": last_end + 2.0})
        new_manifest = tmp_path / "edited.json"
        new_manifest.write_text(json.dumps(edited))
        with pytest.raises(StaleIndexError):
            build_index_from_files(
                new_manifest, checkpoint, bundle.speech_provider(), 14, tmp_path / "x.idx"
            )

    def test_cache_with_extra_chunks_is_stale(self, bundle, checkpoint, tmp_path):
        record = bundle.split_records("test")[0]
        manifest = bundle.root / "interviews" / f"{record.interview_id}.json"
        edited = json.loads(manifest.read_text())
        edited["chunks"] = edited["chunks"][:-1]
        if edited.get("question_spans"):
            horizon = edited["chunks"][-1]["end_s"]
            edited["question_spans"] = [
                s for s in edited["question_spans"] if s["end_s"] <= horizon
            ]
        new_manifest = tmp_path / "short.json"
        new_manifest.write_text(json.dumps(edited))
        with pytest.raises(StaleIndexError, match="cache holds"):
            build_index_from_files(
                new_manifest, checkpoint, bundle.speech_provider(), 14, tmp_path / "y.idx"
            )

    def test_query_matches_score_question(self, bundle, indices_dir):
        record = bundle.split_records("test")[0]
        index = load_index(indices_dir / f"{record.interview_id}.idx")
        qid = record.question_spans[0].question_id
        emb = bundle.question_embeddings[qid]
        outcome = query(index, emb, k=3)
        direct = retrieval.score_question(
            emb, index.embeddings, index.segmentation, index.chunk_times
        )
        assert [r.segment for r in outcome.result.rows] == direct.order()[:3]
        assert [r.score for r in outcome.result.rows] == [r.score for r in direct.rows[:3]]

    def test_query_clamps_large_k(self, bundle, indices_dir):
        record = bundle.split_records("test")[0]
        index = load_index(indices_dir / f"{record.interview_id}.idx")
        outcome = query(index, bundle.question_embeddings[record.question_spans[0].question_id], k=999)
        assert outcome.clamped
        assert len(outcome.result.rows) == len(index.segmentation)

    def test_query_k_zero_rejected(self, bundle, indices_dir):
        record = bundle.split_records("test")[0]
        index = load_index(indices_dir / f"{record.interview_id}.idx")
        with pytest.raises(ValidationError):
            query(index, np.zeros(32), k=0)


@pytest.fixture(scope="module")
def service(bundle, indices_dir, tmp_path_factory):
    feedback = tmp_path_factory.mktemp("fb") / "feedback.jsonl"
    state = load_service_state(
        indices_dir=indices_dir,
        questions_cache=bundle.question_embeddings,
        sentence_provider=bundle.sentence_provider(),
        questionnaire_path=bundle.root / "questionnaire.jsonl",
        feedback_path=feedback,
    )
    server = make_server(state, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, state
    server.shutdown()
    server.server_close()


def get(base, path):
    with urllib.request.urlopen(base + path) as resp:
        return resp.status, json.loads(resp.read().decode())


def post(base, path, body):
    req = urllib.request.Request(
        base + path, data=json.dumps(body).encode(), headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


class TestService:
    def test_interviews_endpoint(self, service, bundle):
        base, _ = service
        status, body = get(base, "/interviews")
        assert status == 200
        ids = [e["id"] for e in body["interviews"]]
        assert ids == sorted(r.interview_id for r in bundle.split_records("test"))
        entry = body["interviews"][0]
        assert set(entry) >= {"id", "n_chunks", "n_segments"}

    def test_query_round_trip(self, service, bundle, indices_dir):
        base, _ = service
        record = bundle.split_records("test")[0]
        qid = record.question_spans[0].question_id
        status, body = post(
            base, "/query", {"interview_id": record.interview_id, "question_id": qid, "k": 3}
        )
        assert status == 200
        assert not body["clamped"]
        assert len(body["results"]) == 3
        scores = [r["score"] for r in body["results"]]
        assert scores == sorted(scores, reverse=True)
        row = body["results"][0]
        assert set(row) == {"segment", "score", "start_s", "end_s", "best_chunk", "best_chunk_start_s"}
        index = load_index(indices_dir / f"{record.interview_id}.idx")
        direct = query(index, bundle.question_embeddings[qid], 3)
        assert [r["segment"] for r in body["results"]] == [
            r.segment for r in direct.result.rows
        ]

    def test_free_text_query(self, service, bundle):
        base, _ = service
        record = bundle.split_records("test")[0]
        text = bundle.question_texts()[record.question_spans[0].question_id]
        status, body = post(
            base, "/query", {"interview_id": record.interview_id, "text": text, "k": 2}
        )
        assert status == 200 and len(body["results"]) == 2

    def test_unknown_question_404(self, service, bundle):
        base, _ = service
        record = bundle.split_records("test")[0]
        status, body = post(
            base, "/query", {"interview_id": record.interview_id, "question_id": "nope", "k": 3}
        )
        assert status == 404 and "error" in body

    def test_unknown_interview_404(self, service):
        base, _ = service
        status, _ = post(base, "/query", {"interview_id": "missing", "question_id": "q", "k": 1})
        assert status == 404

    def test_malformed_json_400(self, service):
        base, _ = service
        req = urllib.request.Request(
            base + "/query", data=b"{not json", headers={"Content-Type": "application/json"}
        )
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(req)
        assert err.value.code == 400

    def test_bad_k_400(self, service, bundle):
        base, _ = service
        record = bundle.split_records("test")[0]
        status, _ = post(base, "/query", {"interview_id": record.interview_id, "text": "x", "k": 0})
        assert status == 400

    def test_feedback_appends_jsonl(self, service, bundle):
        base, state = service
        record = bundle.split_records("test")[0]
        for verdict in ("correct", "incorrect"):
            status, body = post(
                base,
                "/feedback",
                {
                    "interview_id": record.interview_id,
                    "question": "which one?",
                    "segment": 0,
                    "verdict": verdict,
                },
            )
            assert status == 200 and body["ok"]
        lines = state.feedback_path.read_text().strip().splitlines()
        assert len(lines) == 2
        entry = json.loads(lines[0])
        assert entry["verdict"] == "correct" and entry["segment"] == 0

    def test_bad_verdict_400(self, service, bundle):
        base, _ = service
        record = bundle.split_records("test")[0]
        status, _ = post(
            base,
            "/feedback",
            {"interview_id": record.interview_id, "question": "?", "segment": 0, "verdict": "meh"},
        )
        assert status == 400

    def test_questionnaire_served(self, service):
        base, _ = service
        with urllib.request.urlopen(base + "/questionnaire.jsonl") as resp:
            first = resp.read().decode().splitlines()[0]
        assert json.loads(first)["id"]

    def test_concurrent_identical_queries(self, service, bundle):
        base, _ = service
        record = bundle.split_records("test")[0]
        qid = record.question_spans[0].question_id
        payload = {"interview_id": record.interview_id, "question_id": qid, "k": 4}
        bodies = [None] * 6
        def hit(i):
            bodies[i] = post(base, "/query", payload)
        threads = [threading.Thread(target=hit, args=(i,)) for i in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(b == bodies[0] for b in bodies)
