"""Contrastive training with dynamic in-audio negative sampling.

Segments of one interview are shuffled into groups of n; chunks of the
other segments in a chunk's group are its negative pool, which defeats
speaker-identity shortcuts. Two smoothed cross-entropy losses are summed:
one pulls each chunk toward its Gaussian-weighted question anchor, the
other pushes negative chunks apart in the speech space itself.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import retrieval
from .corpus import InterviewRecord
from .errors import ConfigError, NumericError, ValidationError
from .gaussian import GaussianConfig, anchor_embeddings, gaussian_weight_matrix
from .head import (
    TRAIN,
    HeadGrads,
    HeadParams,
    backprop_segment,
    encode_segment_tape,
    init_head,
)
from .seeding import STREAM_DROPOUT, STREAM_GROUPING, STREAM_SAMPLING, substream

SegKey = tuple[str, int]  # (interview_id, segment_index)
ChunkRef = tuple[SegKey, int]  # (segment, row within segment)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    group_size: int = 4
    augmentation: int = 2
    gaussian: GaussianConfig = field(default_factory=GaussianConfig)
    learning_rate: float = 3e-4
    scheduler_step: int = 10
    scheduler_decay: float = 0.1
    epochs: int = 40
    positive_mass: float = 0.95
    seed: int = 0
    receptive: int = 20
    stride: int = 2
    dropout: float = 0.1
    eval_window: int = 14
    eval_dev: bool = True
    negative_scope: str = "interview"  # "corpus" = cross-interview ablation

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.group_size < 2:
            raise ConfigError("group_size must be >= 2 (no negatives otherwise)")
        if self.augmentation < 1:
            raise ConfigError("augmentation must be >= 1")
        if not 0.5 < self.positive_mass <= 1.0:
            raise ConfigError("positive_mass must be in (0.5, 1]")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.negative_scope not in ("interview", "corpus"):
            raise ConfigError(f"unknown negative_scope {self.negative_scope!r}")


_CONFIG_KEYS = {
    "batch_size": int,
    "group_size": int,
    "augmentation": int,
    "learning_rate": float,
    "scheduler_step": int,
    "scheduler_decay": float,
    "epochs": int,
    "positive_mass": float,
    "seed": int,
    "receptive": int,
    "stride": int,
    "dropout": float,
    "eval_window": int,
    "eval_dev": lambda v: v if isinstance(v, bool) else v.lower() in ("1", "true", "yes"),
    "negative_scope": str,
}
_GAUSSIAN_KEYS = {"mode": str, "sigma": float, "alpha": float, "sigma_floor": float}


def load_train_config(path: str | Path) -> TrainConfig:
    """Parse a JSON object or key=value lines into a TrainConfig.

    Gaussian fields are nested under "gaussian" in JSON, or written as
    gaussian.mode= etc. in key=value form. Unknown keys are errors.
    """
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    raw: dict[str, object] = {}
    if stripped.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    else:
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key, value = key.strip(), value.strip()
            if key.startswith("gaussian."):
                raw.setdefault("gaussian", {})[key[len("gaussian.") :]] = value  # type: ignore[index]
            else:
                raw[key] = value
    return train_config_from_dict(raw, source=str(path))


def train_config_from_dict(raw: dict, source: str = "<config>") -> TrainConfig:
    kwargs: dict = {}
    for key, value in raw.items():
        if key == "gaussian":
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: 'gaussian' must be an object")
            gkwargs = {}
            for gk, gv in value.items():
                if gk not in _GAUSSIAN_KEYS:
                    raise ConfigError(f"{source}: unknown config key 'gaussian.{gk}'")
                gkwargs[gk] = _GAUSSIAN_KEYS[gk](gv)
            kwargs["gaussian"] = GaussianConfig(**gkwargs)
        elif key in _CONFIG_KEYS:
            kwargs[key] = _CONFIG_KEYS[key](value)
        else:
            raise ConfigError(f"{source}: unknown config key {key!r}")
    return TrainConfig(**kwargs)


# -- group construction --


@dataclass(frozen=True)
class TrainingGroup:
    group_id: str
    interview_id: str
    segments: tuple[SegKey, ...]
    undersized: bool = False

    def __post_init__(self) -> None:
        if len(set(self.segments)) != len(self.segments):
            raise ValidationError(f"group {self.group_id}: duplicate segment")


@dataclass(frozen=True)
class GroupSlot:
    """One segment occurrence in one group; partners are its negative pool."""

    segment: SegKey
    partners: tuple[SegKey, ...]


def build_groups(
    interview_id: str,
    segment_keys: list[SegKey],
    n: int,
    augmentation: int,
    rng: np.random.Generator,
) -> list[TrainingGroup]:
    """Shuffle segments and partition into groups of n, once per
    augmentation pass. When the count is not divisible by n, one extra
    group of the final n segments of the shuffled order keeps the tail
    covered. Interviews with fewer than n segments yield a single
    undersized group."""
    if n < 2:
        raise ValidationError("group size must be >= 2")
    groups: list[TrainingGroup] = []
    for pass_idx in range(augmentation):
        order = list(segment_keys)
        rng.shuffle(order)
        if len(order) < n:
            groups.append(
                TrainingGroup(
                    group_id=f"{interview_id}/p{pass_idx}/undersized",
                    interview_id=interview_id,
                    segments=tuple(order),
                    undersized=True,
                )
            )
            continue
        n_full = len(order) // n
        for g in range(n_full):
            groups.append(
                TrainingGroup(
                    group_id=f"{interview_id}/p{pass_idx}/g{g}",
                    interview_id=interview_id,
                    segments=tuple(order[g * n : (g + 1) * n]),
                )
            )
        if len(order) % n != 0:
            groups.append(
                TrainingGroup(
                    group_id=f"{interview_id}/p{pass_idx}/wrap",
                    interview_id=interview_id,
                    segments=tuple(order[-n:]),
                )
            )
    return groups


def group_slots(groups: list[TrainingGroup]) -> list[GroupSlot]:
    slots = []
    for group in groups:
        for seg in group.segments:
            partners = tuple(s for s in group.segments if s != seg)
            slots.append(GroupSlot(segment=seg, partners=partners))
    return slots


# -- negative sampling --


@dataclass
class NegativeAssignment:
    """K distinct negatives per batch chunk, in slot-then-row order.

    Keyed by occurrence, not segment: a segment drawn into two slots of
    one batch samples negatives independently from each slot's group.
    """

    k: int
    per_chunk: list[tuple[ChunkRef, list[ChunkRef]]]


def assign_negatives(
    batch: list[GroupSlot],
    chunk_counts: dict[SegKey, int],
    rng: np.random.Generator,
) -> NegativeAssignment:
    pools: list[list[ChunkRef]] = []
    for slot in batch:
        pool = [
            (partner, j) for partner in slot.partners for j in range(chunk_counts[partner])
        ]
        if not pool:
            raise ConfigError(
                f"segment {slot.segment} has an empty negative pool (degenerate group)"
            )
        pools.append(pool)
    k = min(len(pool) for pool in pools)
    per_chunk: list[tuple[ChunkRef, list[ChunkRef]]] = []
    for slot, pool in zip(batch, pools):
        for row in range(chunk_counts[slot.segment]):
            picks = rng.choice(len(pool), size=k, replace=False)
            per_chunk.append(((slot.segment, row), [pool[p] for p in picks]))
    return NegativeAssignment(k=k, per_chunk=per_chunk)


# -- losses --


def smoothed_targets(k: int, positive_mass: float) -> np.ndarray:
    """[p+, (1-p+)/K, ...]; positive first, remainder spread evenly."""
    if k < 1:
        raise ValidationError("need at least one negative for smoothed targets")
    targets = np.full(k + 1, (1.0 - positive_mass) / k)
    targets[0] = positive_mass
    return targets


def _smoothed_ce_rows(logits: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise smoothed CE against softmax(logits) and dCE/dlogits.

    Logits are shifted by their row max before exponentiation, which
    leaves the softmax (and hence the loss) unchanged.
    """
    if not np.isfinite(logits).all():
        raise NumericError("non-finite contrastive logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(total)
    ce = -(log_probs @ targets)
    grad = exp / total - targets
    return ce, grad


def _contrastive_losses(
    stacked: np.ndarray,
    own_rows: np.ndarray,
    neg_rows: np.ndarray,
    anchors: np.ndarray,
    targets: np.ndarray,
    with_grad: bool = True,
) -> tuple[float, float, np.ndarray | None]:
    """Both losses over one batch, embeddings stacked into global rows.

    Speech-text: candidates [own, negatives] scored against the chunk's
    fixed anchor. Speech-speech: the chunk itself is the anchor, so the
    positive logit is its squared norm. The denominator includes the
    positive in both. Returns (mean L_st, mean L_ss, dLoss/dstacked).
    """
    own = stacked[own_rows]  # (n, d)
    negs = stacked[neg_rows]  # (n, K, d)
    n = own.shape[0]

    logits_st = np.concatenate(
        [(own * anchors).sum(axis=1, keepdims=True), np.einsum("nkd,nd->nk", negs, anchors)],
        axis=1,
    )
    ce_st, g_st = _smoothed_ce_rows(logits_st, targets)

    logits_ss = np.concatenate(
        [(own * own).sum(axis=1, keepdims=True), np.einsum("nkd,nd->nk", negs, own)],
        axis=1,
    )
    ce_ss, g_ss = _smoothed_ce_rows(logits_ss, targets)

    d_stacked = None
    if with_grad:
        g_st = g_st / n
        g_ss = g_ss / n
        d_stacked = np.zeros_like(stacked)
        np.add.at(d_stacked, own_rows, g_st[:, :1] * anchors)
        np.add.at(d_stacked, neg_rows, g_st[:, 1:, None] * anchors[:, None, :])
        np.add.at(
            d_stacked,
            own_rows,
            2.0 * g_ss[:, :1] * own + np.einsum("nk,nkd->nd", g_ss[:, 1:], negs),
        )
        np.add.at(d_stacked, neg_rows, g_ss[:, 1:, None] * own[:, None, :])
    return float(ce_st.mean()), float(ce_ss.mean()), d_stacked


def _stack_refs(
    embeddings: dict[ChunkRef, np.ndarray],
    anchors: dict[ChunkRef, np.ndarray] | None,
    negatives: dict[ChunkRef, list[ChunkRef]],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    keys = sorted(embeddings)
    row_of = {ref: i for i, ref in enumerate(keys)}
    stacked = np.stack([np.asarray(embeddings[k], dtype=float) for k in keys])
    batch = sorted(negatives)
    own_rows = np.array([row_of[ref] for ref in batch])
    neg_rows = np.array([[row_of[n] for n in negatives[ref]] for ref in batch])
    if anchors is None:
        anchor_mat = stacked[own_rows]
    else:
        anchor_mat = np.stack([np.asarray(anchors[ref], dtype=float) for ref in batch])
    return stacked, own_rows, neg_rows, anchor_mat


def loss_st(
    embeddings: dict[ChunkRef, np.ndarray],
    anchors: dict[ChunkRef, np.ndarray],
    negatives: dict[ChunkRef, list[ChunkRef]],
    targets: np.ndarray,
) -> float:
    """Speech-text loss: per chunk, smoothed CE over [own, negatives]
    logits against the chunk's fixed anchor. Candidates vary, the anchor
    does not."""
    stacked, own_rows, neg_rows, anchor_mat = _stack_refs(embeddings, anchors, negatives)
    st, _, _ = _contrastive_losses(stacked, own_rows, neg_rows, anchor_mat, targets, with_grad=False)
    return st


def loss_ss(
    embeddings: dict[ChunkRef, np.ndarray],
    negatives: dict[ChunkRef, list[ChunkRef]],
    targets: np.ndarray,
) -> float:
    """Speech-speech regularizer: the chunk itself is the anchor, so the
    positive logit is the chunk's squared norm."""
    stacked, own_rows, neg_rows, anchor_mat = _stack_refs(embeddings, None, negatives)
    _, ss, _ = _contrastive_losses(stacked, own_rows, neg_rows, anchor_mat, targets, with_grad=False)
    return ss


# -- one optimization step (forward + analytic gradients) --


@dataclass
class StepResult:
    loss: float
    loss_st: float
    loss_ss: float
    grads: HeadGrads
    k: int


def training_step(
    params: HeadParams,
    batch: list[GroupSlot],
    features_by_segment: dict[SegKey, list[np.ndarray]],
    anchors_by_segment: dict[SegKey, np.ndarray],
    positive_mass: float,
    sampling_rng: np.random.Generator,
    dropout_rng: np.random.Generator | None,
    assignment: NegativeAssignment | None = None,
) -> StepResult:
    """Forward the batch's segments (plus group partners), compute
    L_st + L_ss with label smoothing, and backpropagate into the head.

    ``assignment`` pins a precomputed negative assignment (gradient checks
    need the loss to be a pure function of the parameters).
    """
    needed = sorted({slot.segment for slot in batch} | {p for slot in batch for p in slot.partners})
    encoded = {}
    offsets = {}
    total_rows = 0
    for seg in needed:
        out, tape = encode_segment_tape(features_by_segment[seg], params, TRAIN, dropout_rng)
        encoded[seg] = (out, tape)
        offsets[seg] = total_rows
        total_rows += out.shape[0]
    stacked = np.vstack([encoded[seg][0] for seg in needed])
    chunk_counts = {seg: encoded[seg][0].shape[0] for seg in needed}
    if assignment is None:
        assignment = assign_negatives(batch, chunk_counts, sampling_rng)
    targets = smoothed_targets(assignment.k, positive_mass)

    own_rows = []
    neg_rows = []
    anchor_rows = []
    for (seg, row), negs in assignment.per_chunk:
        own_rows.append(offsets[seg] + row)
        neg_rows.append([offsets[t] + j for t, j in negs])
        anchor_rows.append(anchors_by_segment[seg][row])
    mean_st, mean_ss, d_stacked = _contrastive_losses(
        stacked, np.array(own_rows), np.array(neg_rows), np.stack(anchor_rows), targets
    )

    grads = HeadGrads.zeros_like(params)
    for seg in needed:
        lo = offsets[seg]
        backprop_segment(d_stacked[lo : lo + chunk_counts[seg]], encoded[seg][1], params, grads)
    return StepResult(
        loss=mean_st + mean_ss, loss_st=mean_st, loss_ss=mean_ss, grads=grads, k=assignment.k
    )


# -- Adam with step decay --


@dataclass
class AdamState:
    m: HeadGrads
    v: HeadGrads
    t: int = 0

    @classmethod
    def for_params(cls, params: HeadParams) -> "AdamState":
        return cls(m=HeadGrads.zeros_like(params), v=HeadGrads.zeros_like(params))


def adam_step(
    params: HeadParams,
    grads: HeadGrads,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    state.t += 1
    bias1 = 1.0 - beta1**state.t
    bias2 = 1.0 - beta2**state.t
    for name, tensor in params.tensors().items():
        g = grads.tensors()[name]
        m = state.m.tensors()[name]
        v = state.v.tensors()[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        tensor -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)


def scheduled_lr(cfg: TrainConfig, epoch: int) -> float:
    return cfg.learning_rate * cfg.scheduler_decay ** (epoch // cfg.scheduler_step)


# -- the training loop --


@dataclass
class TrainData:
    """Preloaded training inputs, all keyed by segment."""

    features_by_segment: dict[SegKey, list[np.ndarray]]
    question_ids_by_segment: dict[SegKey, tuple[str, ...]]
    segments_by_interview: dict[str, list[SegKey]]


def segment_chunk_indices(record: InterviewRecord) -> dict[int, list[int]]:
    """Chunk indices per annotated segment, by chunk-midpoint containment."""
    out: dict[int, list[int]] = {s.segment_index: [] for s in record.segments}
    for chunk in record.chunks:
        mid = 0.5 * (chunk.start_s + chunk.end_s)
        for seg in record.segments:
            if seg.start_s <= mid < seg.end_s:
                out[seg.segment_index].append(chunk.index)
                break
    return out


def build_train_data(
    records: list[InterviewRecord],
    speech_provider,
) -> TrainData:
    features: dict[SegKey, list[np.ndarray]] = {}
    question_ids: dict[SegKey, tuple[str, ...]] = {}
    by_interview: dict[str, list[SegKey]] = {}
    for record in sorted(records, key=lambda r: r.interview_id):
        if record.split != "train":
            raise ConfigError(f"interview {record.interview_id} is not in the train split")
        chunk_map = segment_chunk_indices(record)
        for seg in record.segments:
            indices = chunk_map[seg.segment_index]
            if not indices:
                raise ValidationError(
                    f"segment {seg.segment_index} of {record.interview_id} contains no chunks"
                )
            key = (record.interview_id, seg.segment_index)
            features[key] = [
                np.asarray(speech_provider.features(record.interview_id, c), dtype=float)
                for c in indices
            ]
            question_ids[key] = seg.question_ids
            by_interview.setdefault(record.interview_id, []).append(key)
    if not features:
        raise ConfigError("no training segments found")
    return TrainData(
        features_by_segment=features,
        question_ids_by_segment=question_ids,
        segments_by_interview=by_interview,
    )


def build_anchors(
    data: TrainData,
    question_embeddings: dict[str, np.ndarray],
    gaussian_cfg: GaussianConfig,
) -> dict[SegKey, np.ndarray]:
    anchors: dict[SegKey, np.ndarray] = {}
    for seg, feats in data.features_by_segment.items():
        qids = data.question_ids_by_segment[seg]
        q_mat = np.stack([question_embeddings[qid] for qid in qids])
        weights = gaussian_weight_matrix(len(feats), len(qids), gaussian_cfg)
        anchors[seg] = anchor_embeddings(weights, q_mat)
    return anchors


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    lr: float
    dev_r1: float | None
    dev_r5: float | None
    dev_r10: float | None
    dev_ravg: float | None
    wall_s: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "mean_loss": self.mean_loss,
            "lr": self.lr,
            "dev_r1": self.dev_r1,
            "dev_r5": self.dev_r5,
            "dev_r10": self.dev_r10,
            "dev_ravg": self.dev_ravg,
            "wall_s": self.wall_s,
        }


@dataclass
class TrainResult:
    params: HeadParams
    best_params: HeadParams
    best_epoch: int
    log: list[EpochLog]
    steps: int


def train(
    cfg: TrainConfig,
    train_records: list[InterviewRecord],
    speech_provider,
    question_embeddings: dict[str, np.ndarray],
    dev_records: list[InterviewRecord] | None = None,
    dev_provider=None,
    initial: HeadParams | None = None,
) -> TrainResult:
    """Optimize L_st + L_ss with Adam and a step-decay schedule.

    Deterministic for a fixed config seed: grouping, negative sampling and
    dropout each draw from named per-epoch substreams. Saves nothing;
    callers persist checkpoints and logs.
    """
    data = build_train_data(train_records, speech_provider)
    anchors = build_anchors(data, question_embeddings, cfg.gaussian)
    d = next(iter(question_embeddings.values())).shape[0]
    d_raw = next(iter(data.features_by_segment.values()))[0].shape[1]
    params = (
        initial.copy()
        if initial is not None
        else init_head(d_raw, d, cfg.receptive, cfg.stride, cfg.dropout, cfg.seed)
    )
    state = AdamState.for_params(params)
    log: list[EpochLog] = []
    best_params = params.copy()
    best_epoch = -1
    best_ravg = -1.0
    do_dev = cfg.eval_dev and dev_records
    steps = 0

    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        lr = scheduled_lr(cfg, epoch)
        grouping_rng = substream(cfg.seed, STREAM_GROUPING, epoch)
        sampling_rng = substream(cfg.seed, STREAM_SAMPLING, epoch)
        dropout_rng = substream(cfg.seed, STREAM_DROPOUT, epoch)

        slots: list[GroupSlot] = []
        if cfg.negative_scope == "corpus":
            # Ablation: groups drawn across interviews, so negatives no
            # longer share the speaker with their positives.
            all_segments = [
                seg
                for interview_id in sorted(data.segments_by_interview)
                for seg in data.segments_by_interview[interview_id]
            ]
            groups = build_groups("corpus", all_segments, cfg.group_size, cfg.augmentation, grouping_rng)
            slots.extend(group_slots(groups))
        else:
            for interview_id in sorted(data.segments_by_interview):
                groups = build_groups(
                    interview_id,
                    data.segments_by_interview[interview_id],
                    cfg.group_size,
                    cfg.augmentation,
                    grouping_rng,
                )
                slots.extend(group_slots(groups))
        grouping_rng.shuffle(slots)  # type: ignore[arg-type]

        losses = []
        for start in range(0, len(slots), cfg.batch_size):
            batch = slots[start : start + cfg.batch_size]
            result = training_step(
                params,
                batch,
                data.features_by_segment,
                anchors,
                cfg.positive_mass,
                sampling_rng,
                dropout_rng,
            )
            if not np.isfinite(result.loss):
                raise NumericError(f"loss diverged at step {steps}")
            adam_step(params, result.grads, state, lr)
            losses.append(result.loss)
            steps += 1

        dev = (
            evaluate_dev(params, dev_records, dev_provider or speech_provider, question_embeddings, cfg.eval_window)
            if do_dev
            else None
        )
        if dev is not None and dev["ravg"] > best_ravg:
            best_ravg = dev["ravg"]
            best_params = params.copy()
            best_epoch = epoch
        log.append(
            EpochLog(
                epoch=epoch,
                mean_loss=float(np.mean(losses)) if losses else float("nan"),
                lr=lr,
                dev_r1=None if dev is None else dev["r1"],
                dev_r5=None if dev is None else dev["r5"],
                dev_r10=None if dev is None else dev["r10"],
                dev_ravg=None if dev is None else dev["ravg"],
                wall_s=time.perf_counter() - started,
            )
        )
    if best_epoch < 0:
        best_params = params.copy()
    return TrainResult(params=params, best_params=best_params, best_epoch=best_epoch, log=log, steps=steps)


def evaluate_dev(
    params: HeadParams,
    records: list[InterviewRecord],
    speech_provider,
    question_embeddings: dict[str, np.ndarray],
    window: int,
) -> dict[str, float]:
    report = retrieval.evaluate_records(
        records, params, speech_provider, question_embeddings, window
    )
    mean = report["mean"]
    return {"r1": mean["r1"], "r5": mean["r5"], "r10": mean["r10"], "ravg": mean["ravg"]}


def write_train_log(log: list[EpochLog], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for entry in log:
            f.write(json.dumps(entry.to_dict()) + "\n")
