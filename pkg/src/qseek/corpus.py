"""Domain types and manifest I/O for interviews, questions and annotations.

All records are immutable value types, validated on construction, and safe
to share across threads. Chunk indices are always re-derived from temporal
order rather than trusted from files, so caches and manifests cannot drift
apart silently.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestParseError, UnlocatableQuestionError, ValidationError

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    position: int

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("question id must be non-empty")
        if self.position < 0:
            raise ValidationError(f"question {self.id!r}: position must be >= 0")


@dataclass(frozen=True)
class Questionnaire:
    questions: tuple[Question, ...]

    def __post_init__(self) -> None:
        if not self.questions:
            raise ValidationError("empty questionnaire")
        positions = [q.position for q in self.questions]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ValidationError("questionnaire positions must be strictly increasing")
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate question ids in questionnaire")

    def __len__(self) -> int:
        return len(self.questions)

    def by_id(self, question_id: str) -> Question:
        try:
            return self._index[question_id]
        except KeyError:
            raise KeyError(f"unknown question id {question_id!r}") from None

    @property
    def _index(self) -> dict[str, Question]:
        # Built lazily; frozen dataclass, so stash via object.__setattr__.
        cached = self.__dict__.get("_index_cache")
        if cached is None:
            cached = {q.id: q for q in self.questions}
            object.__setattr__(self, "_index_cache", cached)
        return cached


@dataclass(frozen=True)
class Chunk:
    interview_id: str
    index: int
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if self.start_s < 0:
            raise ValidationError(f"chunk {self.index}: start_s must be >= 0")
        if self.end_s <= self.start_s:
            raise ValidationError(
                f"chunk {self.index}: end_s ({self.end_s}) must exceed start_s ({self.start_s})"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class SegmentAnnotation:
    """Train-time annotation: a span known to contain m ordered questions."""

    interview_id: str
    segment_index: int
    start_s: float
    end_s: float
    question_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.end_s <= self.start_s:
            raise ValidationError(f"segment {self.segment_index}: end_s must exceed start_s")
        if not self.question_ids:
            raise ValidationError(f"segment {self.segment_index}: question_ids must be non-empty")
        if len(set(self.question_ids)) != len(self.question_ids):
            raise ValidationError(f"segment {self.segment_index}: duplicate question ids")


@dataclass(frozen=True)
class QuestionSpan:
    """Dev/test-time annotation: exact start/end of one asked question."""

    interview_id: str
    question_id: str
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if self.end_s <= self.start_s:
            raise ValidationError(f"span for {self.question_id!r}: end_s must exceed start_s")


@dataclass(frozen=True)
class InterviewRecord:
    interview_id: str
    split: str
    chunks: tuple[Chunk, ...]
    audio_uri: str | None = None
    segments: tuple[SegmentAnnotation, ...] = ()
    question_spans: tuple[QuestionSpan, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValidationError(f"unknown split {self.split!r}")
        if not self.chunks:
            raise ValidationError(f"interview {self.interview_id!r} has no chunks")
        if self.split == "train" and self.question_spans:
            raise ValidationError("train records must not carry question spans")
        if self.split != "train" and self.segments:
            raise ValidationError(f"{self.split} records must not carry segment annotations")
        _check_disjoint(
            [(s.start_s, s.end_s) for s in self.segments],
            f"interview {self.interview_id!r}: segment annotations overlap",
        )

    @property
    def n_chunks(self) -> int:
        return len(self.chunks)


def _check_disjoint(spans: list[tuple[float, float]], message: str) -> None:
    ordered = sorted(spans)
    for (_, prev_end), (next_start, _) in zip(ordered, ordered[1:]):
        if next_start < prev_end:
            raise ValidationError(message)


# -- questionnaire I/O --


def load_questionnaire(path: str | Path) -> Questionnaire:
    """Load a JSONL questionnaire: one {"id", "text", "position"} per line."""
    path = Path(path)
    questions: list[Question] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                q = Question(id=str(obj["id"]), text=str(obj["text"]), position=int(obj["position"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ManifestParseError(f"{path}:{lineno}: malformed questionnaire line: {exc}") from exc
            if q.id in seen:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate question id {q.id!r} (first seen on line {seen[q.id]})"
                )
            seen[q.id] = lineno
            questions.append(q)
    if not questions:
        raise ValidationError(f"{path}: empty questionnaire")
    return Questionnaire(questions=tuple(questions))


def write_questionnaire(questionnaire: Questionnaire, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for q in questionnaire.questions:
            f.write(json.dumps({"id": q.id, "text": q.text, "position": q.position}) + "\n")


# -- interview manifest I/O --


def load_interview_manifest(path: str | Path) -> InterviewRecord:
    """Load and validate one interview manifest (JSON)."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            obj = json.load(f)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return interview_from_dict(obj)
    except (ValidationError, ManifestParseError) as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def interview_from_dict(obj: dict) -> InterviewRecord:
    try:
        interview_id = str(obj["interview_id"])
        split = str(obj["split"])
        audio_uri = obj.get("audio_uri")
        raw_chunks = obj["chunks"]
    except KeyError as exc:
        raise ManifestParseError(f"missing manifest field {exc}") from exc

    raw_segments = obj.get("segments")
    raw_spans = obj.get("question_spans")
    if split == "train" and raw_spans:
        raise ValidationError("train manifest must not contain question_spans")
    if split in ("dev", "test") and raw_segments:
        raise ValidationError(f"{split} manifest must not contain segments")

    # Indices come from start order, never from the file.
    ordered = sorted(raw_chunks, key=lambda c: float(c["start_s"]))
    chunks = tuple(
        Chunk(interview_id=interview_id, index=i, start_s=float(c["start_s"]), end_s=float(c["end_s"]))
        for i, c in enumerate(ordered)
    )
    for a, b in zip(chunks, chunks[1:]):
        if b.start_s < a.end_s:
            raise ValidationError(
                f"chunks overlap: [{a.start_s}, {a.end_s}] and [{b.start_s}, {b.end_s}]"
            )

    segments = tuple(
        SegmentAnnotation(
            interview_id=interview_id,
            segment_index=int(s["segment_index"]),
            start_s=float(s["start_s"]),
            end_s=float(s["end_s"]),
            question_ids=tuple(str(q) for q in s["question_ids"]),
        )
        for s in (raw_segments or [])
    )
    spans = tuple(
        QuestionSpan(
            interview_id=interview_id,
            question_id=str(s["question_id"]),
            start_s=float(s["start_s"]),
            end_s=float(s["end_s"]),
        )
        for s in sorted(raw_spans or [], key=lambda s: float(s["start_s"]))
    )
    return InterviewRecord(
        interview_id=interview_id,
        split=split,
        chunks=chunks,
        audio_uri=None if audio_uri is None else str(audio_uri),
        segments=segments,
        question_spans=spans,
    )


def interview_to_dict(record: InterviewRecord) -> dict:
    return {
        "interview_id": record.interview_id,
        "split": record.split,
        "audio_uri": record.audio_uri,
        "chunks": [{"start_s": c.start_s, "end_s": c.end_s} for c in record.chunks],
        "segments": [
            {
                "segment_index": s.segment_index,
                "start_s": s.start_s,
                "end_s": s.end_s,
                "question_ids": list(s.question_ids),
            }
            for s in record.segments
        ]
        or None,
        "question_spans": [
            {"question_id": s.question_id, "start_s": s.start_s, "end_s": s.end_s}
            for s in record.question_spans
        ]
        or None,
    }


def write_interview_manifest(record: InterviewRecord, path: str | Path) -> None:
    Path(path).write_text(json.dumps(interview_to_dict(record), indent=1, sort_keys=True) + "\n", encoding="utf-8")


# -- ground truth mapping --


def ground_truth_segment(
    span: QuestionSpan,
    segmentation: list[tuple[int, int]],
    chunks: tuple[Chunk, ...] | list[Chunk],
) -> int:
    """Index of the inference segment with maximal temporal overlap with ``span``.

    ``segmentation`` is a list of half-open chunk-index ranges (start, stop)
    that must partition 0..len(chunks)-1 in order. Ties break toward the
    lower segment index. A span overlapping no chunk at all raises
    ``UnlocatableQuestionError``; callers exclude such questions from the
    metric denominator and report the count.
    """
    _validate_segmentation(segmentation, len(chunks))
    best_idx = -1
    best_overlap = 0.0
    for seg_idx, (lo, hi) in enumerate(segmentation):
        overlap = 0.0
        for chunk in chunks[lo:hi]:
            overlap += max(0.0, min(span.end_s, chunk.end_s) - max(span.start_s, chunk.start_s))
        if overlap > best_overlap:
            best_overlap = overlap
            best_idx = seg_idx
    if best_idx < 0:
        raise UnlocatableQuestionError(
            f"question {span.question_id!r} [{span.start_s}, {span.end_s}] overlaps no chunk"
        )
    return best_idx


def _validate_segmentation(segmentation: list[tuple[int, int]], n_chunks: int) -> None:
    if not segmentation:
        raise ValidationError("empty segmentation")
    expect = 0
    for lo, hi in segmentation:
        if lo != expect or hi <= lo:
            raise ValidationError(f"segmentation is not a contiguous partition at ({lo}, {hi})")
        expect = hi
    if expect != n_chunks:
        raise ValidationError(f"segmentation covers {expect} chunks, interview has {n_chunks}")
