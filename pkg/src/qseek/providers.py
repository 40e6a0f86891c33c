"""Pluggable frozen front-ends.

Real pretrained encoders (VAD, wav2vec-style feature extractors, sentence
transformers, ASR) are consumed through the small interfaces here and are
not part of this repo. The shipped implementations are a pass-through
chunker and deterministic synthetic/fixture providers good enough to train
and evaluate against known ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .corpus import Chunk
from .errors import ProviderError, ValidationError
from .seeding import STREAM_SYNTH, substream


class Chunker(Protocol):
    def chunk(self, interview_id: str, audio: object) -> list[Chunk]: ...


class SpeechFeatureProvider(Protocol):
    dim: int

    def features(self, interview_id: str, chunk_index: int) -> np.ndarray: ...


class SentenceEmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class TranscriptProvider(Protocol):
    def transcript(self, interview_id: str, chunk_index: int) -> str: ...


# -- ops with invariant checks --


def chunk_audio(interview_id: str, audio: object, chunker: Chunker) -> list[Chunk]:
    """Run a chunker and validate ordering/overlap. Zero voiced regions is
    a legitimate empty result, not an error."""
    chunks = chunker.chunk(interview_id, audio)
    ordered = sorted(chunks, key=lambda c: c.start_s)
    for a, b in zip(ordered, ordered[1:]):
        if b.start_s < a.end_s:
            raise ValidationError(
                f"chunker produced overlapping chunks [{a.start_s}, {a.end_s}] / [{b.start_s}, {b.end_s}]"
            )
    return [
        Chunk(interview_id=interview_id, index=i, start_s=c.start_s, end_s=c.end_s)
        for i, c in enumerate(ordered)
    ]


def speech_features(chunk: Chunk, provider: SpeechFeatureProvider) -> np.ndarray:
    mat = np.asarray(provider.features(chunk.interview_id, chunk.index), dtype=float)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise ProviderError(f"features for chunk {chunk.index} must be (T, d'), got {mat.shape}")
    if not np.isfinite(mat).all():
        raise ValidationError(f"non-finite values in features for chunk {chunk.index}")
    return mat


def sentence_embedding(text: str, provider: SentenceEmbeddingProvider) -> np.ndarray:
    if not text:
        raise ValueError("cannot embed empty text")
    vec = np.asarray(provider.embed(text), dtype=float)
    if vec.ndim != 1:
        raise ProviderError(f"sentence embedding must be 1-D, got {vec.shape}")
    if not np.isfinite(vec).all():
        raise ValidationError("non-finite sentence embedding")
    return vec


def transcript(chunk: Chunk, provider: TranscriptProvider) -> str:
    return provider.transcript(chunk.interview_id, chunk.index)


# -- shipped implementations --


@dataclass
class PassthroughChunker:
    """Chunker fed explicit (start_s, end_s) boundaries, e.g. from a VAD run
    done elsewhere. ``audio`` is ignored."""

    boundaries: dict[str, list[tuple[float, float]]]

    def chunk(self, interview_id: str, audio: object) -> list[Chunk]:
        spans = self.boundaries.get(interview_id, [])
        return [
            Chunk(interview_id=interview_id, index=i, start_s=s, end_s=e)
            for i, (s, e) in enumerate(spans)
        ]


class SyntheticSpeechProvider:
    """Deterministic stand-in for a frozen speech feature extractor.

    Each frame of a chunk is ``M @ q_owner + speaker_offset + noise`` where
    M is a hidden full-rank map from the question space into the raw
    feature space, the speaker offset is constant per interview (an easy
    shortcut that in-audio negatives must defeat), and the frame noise is
    i.i.d. Gaussian, re-derived from a per-chunk substream on every call.
    """

    def __init__(
        self,
        mixing: np.ndarray,
        question_vectors: dict[str, np.ndarray],
        chunk_owners: dict[str, list[str]],
        chunk_frames: dict[str, list[int]],
        speaker_offsets: dict[str, np.ndarray],
        noise_scale: float,
        seed: int,
    ):
        self.mixing = np.asarray(mixing, dtype=float)
        self.dim = self.mixing.shape[0]
        self.question_vectors = question_vectors
        self.chunk_owners = chunk_owners
        self.chunk_frames = chunk_frames
        self.speaker_offsets = speaker_offsets
        self.noise_scale = float(noise_scale)
        self.seed = seed

    def clean_mean(self, interview_id: str, chunk_index: int) -> np.ndarray:
        """Noise-free frame value for a chunk (M q + speaker offset)."""
        owner = self.chunk_owners[interview_id][chunk_index]
        q = self.question_vectors[owner]
        return self.mixing @ q + self.speaker_offsets[interview_id]

    def features(self, interview_id: str, chunk_index: int) -> np.ndarray:
        try:
            frames = self.chunk_frames[interview_id][chunk_index]
        except (KeyError, IndexError):
            raise ProviderError(f"unknown chunk {interview_id}:{chunk_index}") from None
        base = self.clean_mean(interview_id, chunk_index)
        rng = substream(self.seed, STREAM_SYNTH, "frame-noise", interview_id, chunk_index)
        noise = rng.normal(0.0, self.noise_scale, size=(frames, self.dim)) if self.noise_scale > 0 else 0.0
        return base[None, :] + noise


class CachedSpeechProvider:
    """Speech features replayed from a frame-level cache; training and
    indexing read from here so raw audio is never touched."""

    def __init__(self, features: dict[tuple[str, int], np.ndarray]):
        self._features = features
        dims = {mat.shape[1] for mat in features.values()}
        if len(dims) != 1:
            raise ValidationError(f"cache mixes feature dims: {sorted(dims)}")
        self.dim = dims.pop()

    def features(self, interview_id: str, chunk_index: int) -> np.ndarray:
        try:
            return self._features[(interview_id, chunk_index)]
        except KeyError:
            raise ProviderError(f"no cached features for {interview_id}:{chunk_index}") from None

    def chunk_count(self, interview_id: str) -> int:
        return sum(1 for iid, _ in self._features if iid == interview_id)


class FixtureSentenceProvider:
    """Sentence embeddings from an exact-match text table."""

    def __init__(self, table: dict[str, np.ndarray], normalize: bool = False):
        if not table:
            raise ValidationError("empty sentence fixture table")
        dims = {np.asarray(v).shape for v in table.values()}
        if len(dims) != 1:
            raise ValidationError(f"fixture table mixes embedding dims: {sorted(dims)}")
        self._table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.dim = next(iter(self._table.values())).shape[0]
        self.normalize = normalize

    def embed(self, text: str) -> np.ndarray:
        try:
            vec = self._table[text]
        except KeyError:
            raise ProviderError(f"text not in fixture embedding table: {text[:60]!r}") from None
        if self.normalize:
            norm = np.linalg.norm(vec)
            if norm > 0:
                return vec / norm
        return vec


class FixtureTranscriptProvider:
    """Per-chunk transcripts from a stored table; '' marks silence."""

    def __init__(self, table: dict[str, list[str]]):
        self._table = table

    def transcript(self, interview_id: str, chunk_index: int) -> str:
        try:
            return self._table[interview_id][chunk_index]
        except (KeyError, IndexError):
            raise ProviderError(f"no transcript for {interview_id}:{chunk_index}") from None
