"""HTTP/JSON query service over persisted retrieval indices.

Endpoints:
  GET  /interviews           -> {"interviews": [{"id", "n_chunks", "n_segments", "audio_uri"}]}
  POST /query                -> {"results": [...], "clamped": bool}
  POST /feedback             -> {"ok": true}; appends one JSONL line
  GET  /questionnaire.jsonl  -> the configured questionnaire, verbatim
  GET  /...                  -> static review-console files, when configured

Indices are immutable after load; request handling is stateless, so the
threading server answers concurrent queries safely. Feedback appends are
serialized by a lock.
"""
from __future__ import annotations

import json
import mimetypes
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .errors import ProviderError, QseekError, ValidationError
from .indexing import RetrievalIndex, load_index, query
from .providers import FixtureSentenceProvider

VERDICTS = ("correct", "incorrect")


@dataclass
class ServiceState:
    indices: dict[str, RetrievalIndex]
    question_embeddings: dict[str, np.ndarray]
    sentence_provider: FixtureSentenceProvider | None
    questionnaire_path: Path | None
    feedback_path: Path
    static_dir: Path | None = None
    feedback_lock: threading.Lock = field(default_factory=threading.Lock)


def load_service_state(
    indices_dir: str | Path,
    questions_cache: dict[str, np.ndarray],
    sentence_provider: FixtureSentenceProvider | None,
    questionnaire_path: str | Path | None,
    feedback_path: str | Path,
    static_dir: str | Path | None = None,
) -> ServiceState:
    indices = {}
    for path in sorted(Path(indices_dir).glob("*.idx")):
        index = load_index(path)
        indices[index.interview_id] = index
    if not indices:
        raise ValidationError(f"no .idx files under {indices_dir}")
    return ServiceState(
        indices=indices,
        question_embeddings=questions_cache,
        sentence_provider=sentence_provider,
        questionnaire_path=None if questionnaire_path is None else Path(questionnaire_path),
        feedback_path=Path(feedback_path),
        static_dir=None if static_dir is None else Path(static_dir),
    )


class _ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _resolve_query_embedding(state: ServiceState, body: dict) -> np.ndarray:
    question_id = body.get("question_id")
    text = body.get("text")
    if question_id:
        emb = state.question_embeddings.get(str(question_id))
        if emb is None:
            raise _ApiError(404, f"unknown question_id {question_id!r}")
        return emb
    if text:
        if state.sentence_provider is None:
            raise _ApiError(400, "free-text queries need a sentence provider")
        try:
            return state.sentence_provider.embed(str(text))
        except ProviderError as exc:
            raise _ApiError(404, str(exc)) from exc
    raise _ApiError(400, "query needs question_id or text")


def handle_query(state: ServiceState, body: dict) -> dict:
    interview_id = body.get("interview_id")
    index = state.indices.get(str(interview_id))
    if index is None:
        raise _ApiError(404, f"unknown interview {interview_id!r}")
    k = body.get("k", 5)
    if not isinstance(k, int) or k < 1:
        raise _ApiError(400, f"k must be a positive integer, got {k!r}")
    emb = _resolve_query_embedding(state, body)
    outcome = query(index, emb, k)
    return {
        "results": [
            {
                "segment": row.segment,
                "score": row.score,
                "start_s": row.start_s,
                "end_s": row.end_s,
                "best_chunk": row.best_chunk,
                "best_chunk_start_s": index.chunk_times[row.best_chunk][0],
            }
            for row in outcome.result.rows
        ],
        "clamped": outcome.clamped,
    }


def handle_interviews(state: ServiceState) -> dict:
    return {
        "interviews": [
            {
                "id": iid,
                "n_chunks": index.n_chunks,
                "n_segments": len(index.segmentation),
                "audio_uri": index.audio_uri,
                "duration_s": index.chunk_times[-1][1],
            }
            for iid, index in sorted(state.indices.items())
        ]
    }


def handle_feedback(state: ServiceState, body: dict) -> dict:
    interview_id = body.get("interview_id")
    if str(interview_id) not in state.indices:
        raise _ApiError(404, f"unknown interview {interview_id!r}")
    verdict = body.get("verdict")
    if verdict not in VERDICTS:
        raise _ApiError(400, f"verdict must be one of {VERDICTS}, got {verdict!r}")
    segment = body.get("segment")
    if not isinstance(segment, int):
        raise _ApiError(400, "segment must be an integer")
    entry = {
        "interview_id": str(interview_id),
        "question": str(body.get("question", "")),
        "segment": segment,
        "verdict": verdict,
        "ts": time.time(),
    }
    with state.feedback_lock:
        with state.feedback_path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(entry) + "\n")
    return {"ok": True}


def build_handler(state: ServiceState) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args) -> None:  # quiet by default
            pass

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _send_file(self, path: Path) -> None:
            data = path.read_bytes()
            ctype = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b""
            try:
                body = json.loads(raw.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise _ApiError(400, f"malformed JSON body: {exc}") from exc
            if not isinstance(body, dict):
                raise _ApiError(400, "JSON body must be an object")
            return body

        def do_OPTIONS(self) -> None:
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self) -> None:
            try:
                if self.path == "/interviews":
                    self._send_json(200, handle_interviews(state))
                elif self.path == "/questionnaire.jsonl" and state.questionnaire_path:
                    self._send_file(state.questionnaire_path)
                elif state.static_dir is not None:
                    rel = self.path.lstrip("/") or "index.html"
                    target = (state.static_dir / rel).resolve()
                    if state.static_dir.resolve() in target.parents or target == state.static_dir.resolve():
                        if target.is_file():
                            self._send_file(target)
                            return
                    self._send_json(404, {"error": "not found"})
                else:
                    self._send_json(404, {"error": "not found"})
            except _ApiError as exc:
                self._send_json(exc.status, {"error": str(exc)})
            except (QseekError, OSError) as exc:
                self._send_json(500, {"error": str(exc)})

        def do_POST(self) -> None:
            try:
                body = self._read_body()
                if self.path == "/query":
                    self._send_json(200, handle_query(state, body))
                elif self.path == "/feedback":
                    self._send_json(200, handle_feedback(state, body))
                else:
                    self._send_json(404, {"error": "not found"})
            except _ApiError as exc:
                self._send_json(exc.status, {"error": str(exc)})
            except QseekError as exc:
                self._send_json(500, {"error": str(exc)})

    return Handler


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8750) -> ThreadingHTTPServer:
    try:
        return ThreadingHTTPServer((host, port), build_handler(state))
    except OSError as exc:
        raise QseekError(f"cannot bind {host}:{port}: {exc}") from exc


def serve_forever(state: ServiceState, host: str = "127.0.0.1", port: int = 8750) -> None:
    server = make_server(state, host, port)
    print(f"qseek service on http://{host}:{port} ({len(state.indices)} interviews)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
