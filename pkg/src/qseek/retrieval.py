"""Fixed-window inference, segment ranking and recall metrics.

At inference an interview has no annotated segment boundaries, so chunks
are cut into fixed windows of W consecutive chunks (default 14, the train
average). Self-attention runs within each window; a question ranks windows
by its best chunk dot-product. R@k is the fraction of an interview's
questions whose true window appears in the top k, averaged across
interviews.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import InterviewRecord, ground_truth_segment
from .errors import UnlocatableQuestionError, ValidationError
from .head import EVAL, HeadParams, encode_segment
from .providers import SentenceEmbeddingProvider, TranscriptProvider

DEFAULT_WINDOW = 14


def inference_segments(n_chunks: int, window: int = DEFAULT_WINDOW) -> list[tuple[int, int]]:
    """Half-open chunk-index ranges of length ``window``; the final range
    keeps the remainder rather than merging (a merged 15..27-chunk window
    would look like nothing seen in training)."""
    if n_chunks < 1 or window < 1:
        raise ValidationError(f"need n_chunks >= 1 and window >= 1, got ({n_chunks}, {window})")
    return [(lo, min(lo + window, n_chunks)) for lo in range(0, n_chunks, window)]


def encode_interview(
    record: InterviewRecord,
    params: HeadParams,
    speech_provider,
    window: int = DEFAULT_WINDOW,
) -> np.ndarray:
    """Eval-mode chunk embeddings, self-attention scoped to each window."""
    segmentation = inference_segments(record.n_chunks, window)
    rows = []
    for lo, hi in segmentation:
        feats = [
            np.asarray(speech_provider.features(record.interview_id, c.index), dtype=float)
            for c in record.chunks[lo:hi]
        ]
        rows.append(encode_segment(feats, params, EVAL).embeddings)
    return np.vstack(rows)


@dataclass(frozen=True)
class RankedSegment:
    segment: int
    score: float
    best_chunk: int
    best_chunk_score: float
    start_s: float
    end_s: float


@dataclass(frozen=True)
class RankedResult:
    rows: tuple[RankedSegment, ...]

    def order(self) -> list[int]:
        return [row.segment for row in self.rows]


def _rank(
    chunk_scores: np.ndarray,
    segmentation: list[tuple[int, int]],
    chunk_times: list[tuple[float, float]],
) -> RankedResult:
    entries = []
    for seg_idx, (lo, hi) in enumerate(segmentation):
        local = chunk_scores[lo:hi]
        best_local = int(np.argmax(local))
        entries.append(
            RankedSegment(
                segment=seg_idx,
                score=float(local[best_local]),
                best_chunk=lo + best_local,
                best_chunk_score=float(local[best_local]),
                start_s=chunk_times[lo][0],
                end_s=chunk_times[hi - 1][1],
            )
        )
    entries.sort(key=lambda e: (-e.score, e.segment))
    return RankedResult(rows=tuple(entries))


def score_question(
    q_emb: np.ndarray,
    embeddings: np.ndarray,
    segmentation: list[tuple[int, int]],
    chunk_times: list[tuple[float, float]],
) -> RankedResult:
    """Rank segments by max over their chunks of q . C_i, ties to the lower
    segment index."""
    if embeddings.shape[0] < 1:
        raise ValidationError("empty interview")
    chunk_scores = embeddings @ np.asarray(q_emb, dtype=float)
    return _rank(chunk_scores, segmentation, chunk_times)


# -- metrics --


def recall_at_k(rankings: dict[str, list[int]], truth: dict[str, int], k: int) -> float:
    """One interview: fraction of questions whose true segment is in the
    top k of that question's ranking."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    if not truth:
        raise ValidationError("no questions to score")
    hits = sum(1 for qid, seg in truth.items() if seg in rankings[qid][:k])
    return hits / len(truth)


def r_avg(r1: float, r5: float, r10: float) -> float:
    return (r1 + r5 + r10) / 3.0


def aggregate_report(per_interview: list[dict], excluded_questions: int) -> dict:
    """Mean over interviews (not over questions), per the metric definition."""
    if not per_interview:
        raise ValidationError("no interviews evaluated")
    mean = {key: float(np.mean([p[key] for p in per_interview])) for key in ("r1", "r5", "r10")}
    mean["ravg"] = r_avg(mean["r1"], mean["r5"], mean["r10"])
    return {
        "per_interview": per_interview,
        "mean": mean,
        "excluded_questions": excluded_questions,
    }


def evaluate_rankings(
    record: InterviewRecord,
    rank_for_question: dict[str, list[int]],
    window: int,
) -> tuple[dict | None, int]:
    """Scores one interview against its question spans.

    Returns (per-interview metrics or None if every question was
    unlocatable, number of excluded questions).
    """
    segmentation = inference_segments(record.n_chunks, window)
    truth: dict[str, int] = {}
    excluded = 0
    for span in record.question_spans:
        if span.question_id not in rank_for_question:
            continue
        try:
            truth[span.question_id] = ground_truth_segment(span, segmentation, record.chunks)
        except UnlocatableQuestionError:
            excluded += 1
    if not truth:
        return None, excluded
    metrics = {
        "id": record.interview_id,
        "r1": recall_at_k(rank_for_question, truth, 1),
        "r5": recall_at_k(rank_for_question, truth, 5),
        "r10": recall_at_k(rank_for_question, truth, 10),
        "n_questions": len(truth),
    }
    return metrics, excluded


def evaluate_records(
    records: list[InterviewRecord],
    params: HeadParams,
    speech_provider,
    question_embeddings: dict[str, np.ndarray],
    window: int = DEFAULT_WINDOW,
) -> dict:
    """Full trained-model evaluation over dev or test records."""
    per_interview = []
    excluded_total = 0
    for record in sorted(records, key=lambda r: r.interview_id):
        embeddings = encode_interview(record, params, speech_provider, window)
        segmentation = inference_segments(record.n_chunks, window)
        times = [(c.start_s, c.end_s) for c in record.chunks]
        rankings = {}
        for span in record.question_spans:
            ranked = score_question(
                question_embeddings[span.question_id], embeddings, segmentation, times
            )
            rankings[span.question_id] = ranked.order()
        metrics, excluded = evaluate_rankings(record, rankings, window)
        excluded_total += excluded
        if metrics is not None:
            per_interview.append(metrics)
    return aggregate_report(per_interview, excluded_total)


# -- learning-free baseline --


def no_train_score(
    question_text: str,
    transcripts: list[str],
    sentence_provider: SentenceEmbeddingProvider,
    segmentation: list[tuple[int, int]],
    chunk_times: list[tuple[float, float]],
) -> RankedResult:
    """Dot products between the question's text embedding and each chunk
    transcript's text embedding; silent chunks sink below every finite
    score."""
    if all(not t for t in transcripts):
        raise ValidationError("all transcripts are empty; nothing to match")
    q_emb = np.asarray(sentence_provider.embed(question_text), dtype=float)
    scores = np.zeros(len(transcripts))
    voiced = np.zeros(len(transcripts), dtype=bool)
    for i, text in enumerate(transcripts):
        if text:
            scores[i] = q_emb @ np.asarray(sentence_provider.embed(text), dtype=float)
            voiced[i] = True
    sentinel = scores[voiced].min() - 1.0
    scores[~voiced] = sentinel
    return _rank(scores, segmentation, chunk_times)


def evaluate_no_train(
    records: list[InterviewRecord],
    transcript_provider: TranscriptProvider,
    sentence_provider: SentenceEmbeddingProvider,
    question_texts: dict[str, str],
    window: int = DEFAULT_WINDOW,
) -> dict:
    per_interview = []
    excluded_total = 0
    for record in sorted(records, key=lambda r: r.interview_id):
        transcripts = [
            transcript_provider.transcript(record.interview_id, c.index) for c in record.chunks
        ]
        segmentation = inference_segments(record.n_chunks, window)
        times = [(c.start_s, c.end_s) for c in record.chunks]
        rankings = {}
        for span in record.question_spans:
            ranked = no_train_score(
                question_texts[span.question_id], transcripts, sentence_provider, segmentation, times
            )
            rankings[span.question_id] = ranked.order()
        metrics, excluded = evaluate_rankings(record, rankings, window)
        excluded_total += excluded
        if metrics is not None:
            per_interview.append(metrics)
    return aggregate_report(per_interview, excluded_total)


# -- transcript-embedding variant of the trainable pipeline --


def text_variant_features(
    transcripts: list[str], sentence_provider: SentenceEmbeddingProvider
) -> tuple[list[np.ndarray], list[bool]]:
    """Each transcript's sentence embedding presented as a 1 x d feature
    matrix for the normal head/training path. Empty transcripts become a
    zero row and are flagged."""
    features = []
    empty_flags = []
    for text in transcripts:
        if text:
            vec = np.asarray(sentence_provider.embed(text), dtype=float)
            features.append(vec[None, :])
            empty_flags.append(False)
        else:
            features.append(np.zeros((1, sentence_provider.dim)))
            empty_flags.append(True)
    return features, empty_flags


class TextFeatureProvider:
    """Speech-feature provider substitute backed by chunk transcripts."""

    def __init__(
        self,
        transcript_provider: TranscriptProvider,
        sentence_provider: SentenceEmbeddingProvider,
    ):
        self.transcripts = transcript_provider
        self.sentences = sentence_provider
        self.dim = sentence_provider.dim

    def features(self, interview_id: str, chunk_index: int) -> np.ndarray:
        text = self.transcripts.transcript(interview_id, chunk_index)
        if not text:
            return np.zeros((1, self.dim))
        return np.asarray(self.sentences.embed(text), dtype=float)[None, :]
