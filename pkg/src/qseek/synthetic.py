"""Deterministic synthetic corpus with known question-chunk alignment.

Stands in for the private field recordings: questions are random unit
vectors in the shared space, a hidden full-rank mixing matrix lifts them
into the raw feature space (the modality gap the head must invert), every
interview adds a constant speaker offset (the shortcut in-audio negatives
must defeat), and frames carry i.i.d. Gaussian noise. Transcript fixtures
come in two flavours: paraphrase embeddings near the owning question, and
deliberately decorrelated ones.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .cache import pack_chunk_features, read_cache, unpack_chunk_features, write_cache
from .corpus import (
    Chunk,
    InterviewRecord,
    Question,
    Questionnaire,
    QuestionSpan,
    SegmentAnnotation,
    load_interview_manifest,
    load_questionnaire,
    write_interview_manifest,
    write_questionnaire,
)
from .errors import ValidationError
from .head import HeadParams
from .providers import (
    CachedSpeechProvider,
    FixtureSentenceProvider,
    FixtureTranscriptProvider,
    SyntheticSpeechProvider,
)
from .seeding import STREAM_SYNTH, substream


@dataclass(frozen=True)
class SyntheticSpec:
    d: int = 32
    d_raw: int = 48
    train_interviews: int = 20
    dev_interviews: int = 3
    test_interviews: int = 5
    segments_per_interview: int = 10
    questions_per_segment: int = 5
    chunks_per_question: tuple[int, int] = (2, 4)
    frames_per_chunk: tuple[int, int] = (3, 6)
    questionnaire_size: int = 150
    signal_scale: float = 2.0
    noise_scale: float = 0.8
    speaker_offset_scale: float = 0.75
    paraphrase_noise_scale: float = 0.02
    transcript_scale: float = 8.0
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.d, self.d_raw) < 2:
            raise ValidationError("dims must be >= 2")
        if min(self.noise_scale, self.speaker_offset_scale, self.paraphrase_noise_scale) < 0:
            raise ValidationError("noise scales must be >= 0")
        asked = self.segments_per_interview * self.questions_per_segment
        if self.questionnaire_size < asked:
            raise ValidationError(
                f"questionnaire ({self.questionnaire_size}) smaller than questions asked ({asked})"
            )


@dataclass
class SyntheticCorpus:
    spec: SyntheticSpec
    questionnaire: Questionnaire
    question_vectors: dict[str, np.ndarray]
    mixing: np.ndarray  # (d_raw, d)
    speaker_offsets: dict[str, np.ndarray]
    records: list[InterviewRecord]
    chunk_owners: dict[str, list[str]]
    chunk_frames: dict[str, list[int]]
    transcripts_para: dict[str, list[str]]
    transcripts_decor: dict[str, list[str]]
    sentence_table: dict[str, np.ndarray]
    truth: dict

    def split_records(self, split: str) -> list[InterviewRecord]:
        return [r for r in self.records if r.split == split]

    def speech_provider(self) -> SyntheticSpeechProvider:
        return SyntheticSpeechProvider(
            mixing=self.mixing,
            question_vectors=self.question_vectors,
            chunk_owners=self.chunk_owners,
            chunk_frames=self.chunk_frames,
            speaker_offsets=self.speaker_offsets,
            noise_scale=self.spec.noise_scale,
            seed=self.spec.seed,
        )

    def sentence_provider(self, normalize: bool = False) -> FixtureSentenceProvider:
        return FixtureSentenceProvider(self.sentence_table, normalize=normalize)

    def transcript_provider(self, kind: str) -> FixtureTranscriptProvider:
        if kind == "para":
            return FixtureTranscriptProvider(self.transcripts_para)
        if kind == "decor":
            return FixtureTranscriptProvider(self.transcripts_decor)
        raise ValidationError(f"unknown transcript kind {kind!r}")

    def question_texts(self) -> dict[str, str]:
        return {q.id: q.text for q in self.questionnaire.questions}


def _interview_ids(spec: SyntheticSpec) -> list[tuple[str, str]]:
    ids = []
    for split, count in (
        ("train", spec.train_interviews),
        ("dev", spec.dev_interviews),
        ("test", spec.test_interviews),
    ):
        ids.extend((split, f"{split}-{i:03d}") for i in range(count))
    return ids


def generate_corpus(spec: SyntheticSpec) -> SyntheticCorpus:
    """Build the full corpus. Deterministic per spec.seed, including the
    frame noise (re-derived per chunk from named substreams)."""
    rng_q = substream(spec.seed, STREAM_SYNTH, "questionnaire")
    questions = []
    question_vectors: dict[str, np.ndarray] = {}
    for k in range(spec.questionnaire_size):
        qid = f"q{k:04d}"
        questions.append(Question(id=qid, text=f"What is observation {k:04d} about?", position=k))
        vec = rng_q.normal(size=spec.d)
        question_vectors[qid] = vec / np.linalg.norm(vec)
    questionnaire = Questionnaire(questions=tuple(questions))

    # Entry std = signal_scale gives per-entry feature std = signal_scale
    # for unit question vectors.
    rng_m = substream(spec.seed, STREAM_SYNTH, "mixing")
    mixing = rng_m.normal(0.0, spec.signal_scale, size=(spec.d_raw, spec.d))
    # Speaker offsets live in the orthogonal complement of the signal
    # subspace when one exists: a large, trivially exploitable interview
    # discriminant (the shortcut cross-interview negatives fall for) that a
    # head serving within-interview ranking can simply null out.
    if spec.d_raw > spec.d:
        q_full, _ = np.linalg.qr(mixing, mode="complete")
        offset_basis = q_full[:, spec.d :]
    else:
        offset_basis = np.eye(spec.d_raw)

    records: list[InterviewRecord] = []
    speaker_offsets: dict[str, np.ndarray] = {}
    chunk_owners: dict[str, list[str]] = {}
    chunk_frames: dict[str, list[int]] = {}
    transcripts_para: dict[str, list[str]] = {}
    transcripts_decor: dict[str, list[str]] = {}
    sentence_table: dict[str, np.ndarray] = {
        q.text: question_vectors[q.id] for q in questionnaire.questions
    }
    truth_interviews: dict[str, dict] = {}

    asked_per_interview = spec.segments_per_interview * spec.questions_per_segment
    for split, interview_id in _interview_ids(spec):
        rng = substream(spec.seed, STREAM_SYNTH, "structure", interview_id)
        offset_rng = substream(spec.seed, STREAM_SYNTH, "speaker", interview_id)
        speaker_offsets[interview_id] = (
            offset_basis
            @ offset_rng.normal(0.0, spec.speaker_offset_scale, size=offset_basis.shape[1])
            if spec.speaker_offset_scale > 0
            else np.zeros(spec.d_raw)
        )

        asked = sorted(
            rng.choice(spec.questionnaire_size, size=asked_per_interview, replace=False)
        )
        asked_ids = [f"q{k:04d}" for k in asked]

        chunks: list[Chunk] = []
        owners: list[str] = []
        frames: list[int] = []
        segments: list[SegmentAnnotation] = []
        spans: list[QuestionSpan] = []
        question_chunk_range: dict[str, tuple[int, int]] = {}
        cursor = float(rng.uniform(0.5, 2.0))
        m = spec.questions_per_segment
        for seg_idx in range(spec.segments_per_interview):
            seg_qids = asked_ids[seg_idx * m : (seg_idx + 1) * m]
            seg_start = cursor
            for qid in seg_qids:
                n_chunks_q = int(rng.integers(spec.chunks_per_question[0], spec.chunks_per_question[1] + 1))
                first = len(chunks)
                for _ in range(n_chunks_q):
                    dur = float(rng.uniform(1.4, 2.3))
                    chunks.append(
                        Chunk(
                            interview_id=interview_id,
                            index=len(chunks),
                            start_s=round(cursor, 3),
                            end_s=round(cursor + dur, 3),
                        )
                    )
                    owners.append(qid)
                    frames.append(
                        int(rng.integers(spec.frames_per_chunk[0], spec.frames_per_chunk[1] + 1))
                    )
                    cursor += dur + float(rng.uniform(0.05, 0.25))
                question_chunk_range[qid] = (first, len(chunks) - 1)
                spans.append(
                    QuestionSpan(
                        interview_id=interview_id,
                        question_id=qid,
                        start_s=chunks[first].start_s,
                        end_s=chunks[-1].end_s,
                    )
                )
            segments.append(
                SegmentAnnotation(
                    interview_id=interview_id,
                    segment_index=seg_idx,
                    start_s=seg_start,
                    end_s=chunks[-1].end_s,
                    question_ids=tuple(seg_qids),
                )
            )
            cursor += float(rng.uniform(0.8, 1.5))

        records.append(
            InterviewRecord(
                interview_id=interview_id,
                split=split,
                chunks=tuple(chunks),
                audio_uri=None,
                segments=tuple(segments) if split == "train" else (),
                question_spans=tuple(spans) if split != "train" else (),
            )
        )
        chunk_owners[interview_id] = owners
        chunk_frames[interview_id] = frames

        para_rng = substream(spec.seed, STREAM_SYNTH, "para", interview_id)
        decor_rng = substream(spec.seed, STREAM_SYNTH, "decor", interview_id)
        para_texts = []
        decor_texts = []
        for idx, qid in enumerate(owners):
            para = f"paraphrased utterance {interview_id} chunk {idx:04d}"
            decor = f"unrelated utterance {interview_id} chunk {idx:04d}"
            para_texts.append(para)
            decor_texts.append(decor)
            # Transcript embeddings carry a larger norm than the unit
            # question vectors (mirrors raw encoder outputs); rankings are
            # scale-invariant, training signal is not.
            sentence_table[para] = spec.transcript_scale * (
                question_vectors[qid]
                + (
                    para_rng.normal(0.0, spec.paraphrase_noise_scale, size=spec.d)
                    if spec.paraphrase_noise_scale > 0
                    else 0.0
                )
            )
            unrelated = decor_rng.normal(size=spec.d)
            sentence_table[decor] = spec.transcript_scale * unrelated / np.linalg.norm(unrelated)
        transcripts_para[interview_id] = para_texts
        transcripts_decor[interview_id] = decor_texts

        truth_interviews[interview_id] = {
            "owners": owners,
            "questions": {
                qid: {
                    "chunk_lo": lo,
                    "chunk_hi": hi,
                    "segment": _true_window(chunks, lo, hi, window=14),
                }
                for qid, (lo, hi) in question_chunk_range.items()
            },
        }

    truth = {"window": 14, "interviews": truth_interviews}
    return SyntheticCorpus(
        spec=spec,
        questionnaire=questionnaire,
        question_vectors=question_vectors,
        mixing=mixing,
        speaker_offsets=speaker_offsets,
        records=records,
        chunk_owners=chunk_owners,
        chunk_frames=chunk_frames,
        transcripts_para=transcripts_para,
        transcripts_decor=transcripts_decor,
        sentence_table=sentence_table,
        truth=truth,
    )


def _true_window(chunks: list[Chunk], lo: int, hi: int, window: int) -> int:
    """Window holding the largest share of the question's chunk time;
    straight loops, ties to the lower window."""
    best_w = -1
    best_overlap = -1.0
    n_windows = (len(chunks) + window - 1) // window
    for w in range(n_windows):
        overlap = 0.0
        for c in range(w * window, min((w + 1) * window, len(chunks))):
            if lo <= c <= hi:
                overlap += chunks[c].end_s - chunks[c].start_s
        if overlap > best_overlap:
            best_overlap = overlap
            best_w = w
    return best_w


def materialize_features(corpus: SyntheticCorpus) -> dict[tuple[str, int], np.ndarray]:
    provider = corpus.speech_provider()
    out = {}
    for record in corpus.records:
        for chunk in record.chunks:
            out[(record.interview_id, chunk.index)] = provider.features(
                record.interview_id, chunk.index
            )
    return out


# -- analytic head for the zero-noise identifiability check --


def pseudo_inverse_head(
    mixing: np.ndarray, receptive: int = 20, stride: int = 2, shift: float = 12.0
) -> HeadParams:
    """Closed-form head that inverts the mixing map without training.

    The convolution copies each window's last (always real, thanks to left
    padding) frame and adds a large positive bias so GELU operates on its
    asymptote; the projection then applies the pseudo-inverse of the mixing
    transpose and subtracts the bias contribution. On noise-free,
    offset-free features the chunk embedding equals the owning question
    vector up to ~1e-15.
    """
    mixing = np.asarray(mixing, dtype=float)
    d_raw, d = mixing.shape
    conv_w = np.zeros((d_raw, receptive))
    conv_w[:, receptive - 1] = 1.0
    conv_b = np.full(d_raw, shift)
    proj_w = np.linalg.pinv(mixing.T)
    proj_b = -shift * proj_w.sum(axis=0)
    return HeadParams(
        conv_w=conv_w,
        conv_b=conv_b,
        proj_w=proj_w,
        proj_b=proj_b,
        stride=stride,
        dropout=0.0,
        seed=0,
    )


# -- fixture bundle I/O --


def write_fixture_bundle(corpus: SyntheticCorpus, out_dir: str | Path) -> None:
    """Write manifests, caches and truth; byte-identical for a fixed seed."""
    out = Path(out_dir)
    (out / "interviews").mkdir(parents=True, exist_ok=True)
    (out / "caches").mkdir(exist_ok=True)

    write_questionnaire(corpus.questionnaire, out / "questionnaire.jsonl")
    for record in corpus.records:
        write_interview_manifest(record, out / "interviews" / f"{record.interview_id}.json")

    write_cache(pack_chunk_features(materialize_features(corpus)), out / "caches" / "features.cache")
    write_cache(dict(corpus.question_vectors), out / "caches" / "questions.cache")
    write_cache(dict(corpus.sentence_table), out / "caches" / "sentences.cache")

    def dump(obj: object, name: str) -> None:
        (out / name).write_text(
            json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )

    dump(corpus.transcripts_para, "transcripts_para.json")
    dump(corpus.transcripts_decor, "transcripts_decor.json")
    dump(
        {
            "spec": asdict(corpus.spec),
            "mixing": corpus.mixing.tolist(),
            "speaker_offsets": {k: v.tolist() for k, v in corpus.speaker_offsets.items()},
            "chunk_frames": corpus.chunk_frames,
        },
        "generator.json",
    )
    dump(corpus.truth, "truth.json")


@dataclass
class FixtureBundle:
    root: Path
    questionnaire: Questionnaire
    records: list[InterviewRecord]
    question_embeddings: dict[str, np.ndarray]
    sentence_table: dict[str, np.ndarray]
    features: dict[tuple[str, int], np.ndarray]
    transcripts_para: dict[str, list[str]]
    transcripts_decor: dict[str, list[str]]
    mixing: np.ndarray
    truth: dict

    def split_records(self, split: str) -> list[InterviewRecord]:
        return [r for r in self.records if r.split == split]

    def speech_provider(self) -> CachedSpeechProvider:
        return CachedSpeechProvider(self.features)

    def sentence_provider(self, normalize: bool = False) -> FixtureSentenceProvider:
        return FixtureSentenceProvider(self.sentence_table, normalize=normalize)

    def transcript_provider(self, kind: str) -> FixtureTranscriptProvider:
        table = self.transcripts_para if kind == "para" else self.transcripts_decor
        if kind not in ("para", "decor"):
            raise ValidationError(f"unknown transcript kind {kind!r}")
        return FixtureTranscriptProvider(table)

    def question_texts(self) -> dict[str, str]:
        return {q.id: q.text for q in self.questionnaire.questions}


def load_fixture_bundle(root: str | Path) -> FixtureBundle:
    root = Path(root)
    questionnaire = load_questionnaire(root / "questionnaire.jsonl")
    records = [
        load_interview_manifest(p) for p in sorted((root / "interviews").glob("*.json"))
    ]
    question_embeddings = {
        k: v.astype(float) for k, v in read_cache(root / "caches" / "questions.cache").entries.items()
    }
    sentence_table = {
        k: v.astype(float) for k, v in read_cache(root / "caches" / "sentences.cache").entries.items()
    }
    features = unpack_chunk_features(read_cache(root / "caches" / "features.cache"))
    generator = json.loads((root / "generator.json").read_text(encoding="utf-8"))
    return FixtureBundle(
        root=root,
        questionnaire=questionnaire,
        records=records,
        question_embeddings=question_embeddings,
        sentence_table=sentence_table,
        features=features,
        transcripts_para=json.loads((root / "transcripts_para.json").read_text(encoding="utf-8")),
        transcripts_decor=json.loads((root / "transcripts_decor.json").read_text(encoding="utf-8")),
        mixing=np.array(generator["mixing"], dtype=float),
        truth=json.loads((root / "truth.json").read_text(encoding="utf-8")),
    )
