"""Persisted per-interview retrieval indices.

An index stores the post-head chunk embeddings (f32) plus chunk
timestamps, so queries need only a sentence embedding for the question.
Files are deterministic for identical inputs: the recorded build timestamp
honors SOURCE_DATE_EPOCH and defaults to 0, because wall-clock stamps
would break byte-idempotent rebuilds.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import InterviewRecord
from .errors import ProviderError, StaleIndexError, ValidationError
from .head import HeadParams, checkpoint_fingerprint, load_checkpoint
from .retrieval import RankedResult, encode_interview, inference_segments, score_question

INDEX_MAGIC = b"IDNTINDX"
INDEX_VERSION = 1


@dataclass
class RetrievalIndex:
    interview_id: str
    window: int
    embeddings: np.ndarray  # (n_chunks, d) float
    chunk_times: list[tuple[float, float]]
    checkpoint_fingerprint: str
    manifest_sha256: str
    build_timestamp: int
    audio_uri: str | None = None

    @property
    def n_chunks(self) -> int:
        return self.embeddings.shape[0]

    @property
    def segmentation(self) -> list[tuple[int, int]]:
        return inference_segments(self.n_chunks, self.window)


def _build_time() -> int:
    return int(os.environ.get("SOURCE_DATE_EPOCH", "0"))


def manifest_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_index(
    record: InterviewRecord,
    params: HeadParams,
    speech_provider,
    window: int,
    out_path: str | Path,
    checkpoint_fp: str,
    manifest_fp: str,
) -> RetrievalIndex:
    """Encode every inference window in eval mode and persist the result.

    A manifest that lists chunks the feature source no longer covers means
    the manifest was edited after the cache was built; that is a staleness
    error, not a provider error.
    """
    try:
        embeddings = encode_interview(record, params, speech_provider, window)
    except ProviderError as exc:
        raise StaleIndexError(
            f"{record.interview_id}: manifest chunk has no features ({exc}); "
            "manifest edited after the feature cache?"
        ) from exc
    cached_count = getattr(speech_provider, "chunk_count", None)
    if callable(cached_count):
        available = cached_count(record.interview_id)
        if available != record.n_chunks:
            raise StaleIndexError(
                f"{record.interview_id}: cache holds {available} chunks, manifest lists {record.n_chunks}"
            )
    index = RetrievalIndex(
        interview_id=record.interview_id,
        window=window,
        embeddings=embeddings,
        chunk_times=[(c.start_s, c.end_s) for c in record.chunks],
        checkpoint_fingerprint=checkpoint_fp,
        manifest_sha256=manifest_fp,
        build_timestamp=_build_time(),
        audio_uri=record.audio_uri,
    )
    write_index(index, out_path)
    return index


def build_index_from_files(
    manifest_path: str | Path,
    checkpoint_path: str | Path,
    speech_provider,
    window: int,
    out_path: str | Path,
) -> RetrievalIndex:
    from .corpus import load_interview_manifest

    record = load_interview_manifest(manifest_path)
    params, _ = load_checkpoint(checkpoint_path)
    return build_index(
        record,
        params,
        speech_provider,
        window,
        out_path,
        checkpoint_fp=checkpoint_fingerprint(checkpoint_path),
        manifest_fp=manifest_sha256(manifest_path),
    )


def write_index(index: RetrievalIndex, path: str | Path) -> None:
    header = {
        "interview_id": index.interview_id,
        "window": index.window,
        "n_chunks": index.n_chunks,
        "d": int(index.embeddings.shape[1]),
        "chunk_times": [[s, e] for s, e in index.chunk_times],
        "checkpoint_fingerprint": index.checkpoint_fingerprint,
        "manifest_sha256": index.manifest_sha256,
        "build_timestamp": index.build_timestamp,
        "audio_uri": index.audio_uri,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as f:
        f.write(INDEX_MAGIC)
        f.write(struct.pack("<HI", INDEX_VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(np.ascontiguousarray(index.embeddings, dtype="<f4").tobytes())


def load_index(path: str | Path) -> RetrievalIndex:
    data = Path(path).read_bytes()
    if data[: len(INDEX_MAGIC)] != INDEX_MAGIC:
        raise ValidationError(f"{path}: not an index file")
    version, header_len = struct.unpack_from("<HI", data, len(INDEX_MAGIC))
    if version != INDEX_VERSION:
        raise ValidationError(f"{path}: unsupported index version {version}")
    offset = len(INDEX_MAGIC) + 6
    header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    n, d = header["n_chunks"], header["d"]
    flat = np.frombuffer(data[offset : offset + 4 * n * d], dtype="<f4")
    if flat.size != n * d:
        raise ValidationError(f"{path}: truncated index payload")
    return RetrievalIndex(
        interview_id=header["interview_id"],
        window=header["window"],
        embeddings=flat.astype(float).reshape(n, d),
        chunk_times=[(s, e) for s, e in header["chunk_times"]],
        checkpoint_fingerprint=header["checkpoint_fingerprint"],
        manifest_sha256=header["manifest_sha256"],
        build_timestamp=header["build_timestamp"],
        audio_uri=header["audio_uri"],
    )


@dataclass
class QueryOutcome:
    result: RankedResult
    clamped: bool


def query(index: RetrievalIndex, question_embedding: np.ndarray, k: int) -> QueryOutcome:
    """Top-k ranked windows with time spans. k larger than the number of
    windows is clamped and flagged rather than rejected."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    ranked = score_question(
        question_embedding, index.embeddings, index.segmentation, index.chunk_times
    )
    clamped = k > len(ranked.rows)
    return QueryOutcome(
        result=RankedResult(rows=ranked.rows[: min(k, len(ranked.rows))]), clamped=clamped
    )
