"""The only trainable network.

Per chunk: depthwise 1-D convolution along time (one filter per input
channel), GELU, dropout, mean pool over frames, then a linear projection
into the shared d-space. Per segment: parameter-free self-attention over
the projected chunk vectors with a residual skip, so each chunk gathers
context from its neighbours:

    pooled_i = mean_t(dropout(gelu(conv(x_i))))
    C_i      = pooled_i @ W + b
    out      = C + softmax(C C^T / sqrt(d)) C

Forward and backward passes are written out explicitly in numpy (float64);
the backward is checked against central finite differences in the test
suite. Chunks shorter than the receptive field are left-padded with zeros,
which preserves mean-pool semantics.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from .errors import NumericError, ValidationError
from .seeding import STREAM_INIT, substream

TRAIN = "train"
EVAL = "eval"

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return cdf + x * pdf


@dataclass
class HeadParams:
    conv_w: np.ndarray  # (d_raw, receptive)
    conv_b: np.ndarray  # (d_raw,)
    proj_w: np.ndarray  # (d_raw, d)
    proj_b: np.ndarray  # (d,)
    stride: int
    dropout: float
    seed: int

    @property
    def d_raw(self) -> int:
        return self.conv_w.shape[0]

    @property
    def d(self) -> int:
        return self.proj_w.shape[1]

    @property
    def receptive(self) -> int:
        return self.conv_w.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        """Trainable tensors in fixed order (shared references, not copies)."""
        return {
            "conv_w": self.conv_w,
            "conv_b": self.conv_b,
            "proj_w": self.proj_w,
            "proj_b": self.proj_b,
        }

    def copy(self) -> "HeadParams":
        return HeadParams(
            conv_w=self.conv_w.copy(),
            conv_b=self.conv_b.copy(),
            proj_w=self.proj_w.copy(),
            proj_b=self.proj_b.copy(),
            stride=self.stride,
            dropout=self.dropout,
            seed=self.seed,
        )


@dataclass
class HeadGrads:
    conv_w: np.ndarray
    conv_b: np.ndarray
    proj_w: np.ndarray
    proj_b: np.ndarray

    @classmethod
    def zeros_like(cls, params: HeadParams) -> "HeadGrads":
        return cls(
            conv_w=np.zeros_like(params.conv_w),
            conv_b=np.zeros_like(params.conv_b),
            proj_w=np.zeros_like(params.proj_w),
            proj_b=np.zeros_like(params.proj_b),
        )

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "conv_w": self.conv_w,
            "conv_b": self.conv_b,
            "proj_w": self.proj_w,
            "proj_b": self.proj_b,
        }


BIAS_SHIFT = 2.0


def init_head(
    d_raw: int,
    d: int,
    receptive: int = 20,
    stride: int = 2,
    dropout: float = 0.1,
    seed: int = 0,
) -> HeadParams:
    """Identity-friendly init, deterministic for a fixed seed.

    All tensors draw fan-in-scaled uniform noise; on top of that the last
    convolution tap starts at 1 (the window's last frame is always real
    under left padding, so the conv begins as "copy the newest frame"),
    the conv bias starts at +2 so GELU operates near its linear region,
    and the projection bias cancels the resulting constant rail. Plain
    symmetric init stalls: half the single-active-tap channels would need
    a sign flip, which Adam cannot deliver within the step-decay budget.
    """
    if min(d_raw, d, receptive, stride) < 1:
        raise ValidationError(
            f"dims must be >= 1: d_raw={d_raw} d={d} receptive={receptive} stride={stride}"
        )
    if not 0.0 <= dropout < 1.0:
        raise ValidationError(f"dropout must be in [0, 1), got {dropout}")
    rng = substream(seed, STREAM_INIT)
    conv_bound = 0.1 / np.sqrt(receptive)
    proj_bound = 1.0 / np.sqrt(d_raw)
    conv_w = rng.uniform(-conv_bound, conv_bound, size=(d_raw, receptive))
    conv_w[:, receptive - 1] += 1.0
    conv_b = rng.uniform(-conv_bound, conv_bound, size=d_raw) + BIAS_SHIFT
    proj_w = rng.uniform(-proj_bound, proj_bound, size=(d_raw, d))
    proj_b = rng.uniform(-proj_bound, proj_bound, size=d) - BIAS_SHIFT * proj_w.sum(axis=0)
    return HeadParams(
        conv_w=conv_w,
        conv_b=conv_b,
        proj_w=proj_w,
        proj_b=proj_b,
        stride=stride,
        dropout=dropout,
        seed=seed,
    )


# -- forward --


@dataclass
class ChunkTape:
    windows: np.ndarray  # (frames, d_raw, receptive)
    pre_activation: np.ndarray  # (frames, d_raw)
    keep_mask: np.ndarray | None  # dropout mask, None in eval mode


@dataclass
class SegmentTape:
    chunk_tapes: list[ChunkTape]
    pooled: np.ndarray  # (n_s, d_raw)
    projected: np.ndarray  # (n_s, d)
    attention: np.ndarray  # (n_s, n_s)


@dataclass
class SegmentEmbedding:
    """Chunk embeddings after self-attention, with the pre-attention
    projections retained for diagnostics."""

    embeddings: np.ndarray  # (n_s, d)
    pre_attention: np.ndarray  # (n_s, d)
    attention: np.ndarray = field(repr=False, default=None)


def conv_pool(
    features: np.ndarray,
    params: HeadParams,
    mode: str = EVAL,
    dropout_rng: np.random.Generator | None = None,
) -> np.ndarray:
    vec, _ = _conv_pool_tape(features, params, mode, dropout_rng)
    return vec


def _conv_pool_tape(
    features: np.ndarray,
    params: HeadParams,
    mode: str,
    dropout_rng: np.random.Generator | None,
) -> tuple[np.ndarray, ChunkTape]:
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValidationError(f"chunk features must be (T, d_raw) with T >= 1, got {x.shape}")
    if x.shape[1] != params.d_raw:
        raise ValidationError(f"feature dim {x.shape[1]} != head d_raw {params.d_raw}")
    receptive, stride = params.receptive, params.stride
    if x.shape[0] < receptive:
        x = np.vstack([np.zeros((receptive - x.shape[0], x.shape[1])), x])
    windows = sliding_window_view(x, receptive, axis=0)[::stride]  # (frames, d_raw, receptive)
    z = np.einsum("fcr,cr->fc", windows, params.conv_w) + params.conv_b
    g = gelu(z)
    keep_mask = None
    if mode == TRAIN and params.dropout > 0.0:
        if dropout_rng is None:
            raise ValidationError("train mode with dropout requires a dropout rng")
        keep_mask = dropout_rng.random(g.shape) >= params.dropout
        g = g * keep_mask / (1.0 - params.dropout)
    pooled = g.mean(axis=0)
    return pooled, ChunkTape(windows=windows, pre_activation=z, keep_mask=keep_mask)


def encode_segment(
    features_list: list[np.ndarray],
    params: HeadParams,
    mode: str = EVAL,
    dropout_rng: np.random.Generator | None = None,
) -> SegmentEmbedding:
    out, tape = encode_segment_tape(features_list, params, mode, dropout_rng)
    return SegmentEmbedding(
        embeddings=out, pre_attention=tape.projected, attention=tape.attention
    )


def encode_segment_tape(
    features_list: list[np.ndarray],
    params: HeadParams,
    mode: str = EVAL,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, SegmentTape]:
    if mode not in (TRAIN, EVAL):
        raise ValidationError(f"mode must be 'train' or 'eval', got {mode!r}")
    if not features_list:
        raise ValidationError("segment must contain at least one chunk")
    pooled_rows = []
    tapes = []
    for i, feats in enumerate(features_list):
        vec, tape = _conv_pool_tape(feats, params, mode, dropout_rng)
        if not np.isfinite(vec).all():
            raise NumericError(f"non-finite pooled features at chunk {i}")
        pooled_rows.append(vec)
        tapes.append(tape)
    pooled = np.stack(pooled_rows)
    projected = pooled @ params.proj_w + params.proj_b  # (n_s, d)
    scores = projected @ projected.T / np.sqrt(params.d)
    scores -= scores.max(axis=1, keepdims=True)
    expd = np.exp(scores)
    attention = expd / expd.sum(axis=1, keepdims=True)
    out = projected + attention @ projected
    if not np.isfinite(out).all():
        bad = int(np.argwhere(~np.isfinite(out))[0][0])
        raise NumericError(f"non-finite embedding at chunk {bad}")
    return out, SegmentTape(
        chunk_tapes=tapes, pooled=pooled, projected=projected, attention=attention
    )


# -- backward --


def backprop_segment(
    d_out: np.ndarray, tape: SegmentTape, params: HeadParams, grads: HeadGrads
) -> None:
    """Accumulate parameter gradients for one segment given dLoss/d(out).

    Inputs are frozen provider features, so no gradient flows past the
    convolution.
    """
    attention, projected = tape.attention, tape.projected
    d_proj = d_out.copy()
    d_proj += attention.T @ d_out
    d_attn = d_out @ projected.T
    row_dot = (d_attn * attention).sum(axis=1, keepdims=True)
    d_scores = attention * (d_attn - row_dot)
    d_proj += (d_scores + d_scores.T) @ projected / np.sqrt(params.d)

    grads.proj_w += tape.pooled.T @ d_proj
    grads.proj_b += d_proj.sum(axis=0)
    d_pooled = d_proj @ params.proj_w.T  # (n_s, d_raw)

    for i, chunk_tape in enumerate(tape.chunk_tapes):
        frames = chunk_tape.pre_activation.shape[0]
        d_g = np.broadcast_to(d_pooled[i] / frames, chunk_tape.pre_activation.shape)
        if chunk_tape.keep_mask is not None:
            d_g = d_g * chunk_tape.keep_mask / (1.0 - params.dropout)
        d_z = d_g * gelu_grad(chunk_tape.pre_activation)
        grads.conv_w += np.einsum("fc,fcr->cr", d_z, chunk_tape.windows)
        grads.conv_b += d_z.sum(axis=0)


# -- checkpoint I/O --

CHECKPOINT_MAGIC = b"IDNTHEAD"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: HeadParams, step: int, path: str | Path) -> None:
    """Versioned binary checkpoint: header then tensors, f32 little-endian."""
    with Path(path).open("wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(
            struct.pack(
                "<HIIIIdQQ",
                CHECKPOINT_VERSION,
                params.d_raw,
                params.d,
                params.receptive,
                params.stride,
                params.dropout,
                params.seed,
                step,
            )
        )
        for tensor in params.tensors().values():
            f.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[HeadParams, int]:
    data = Path(path).read_bytes()
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValidationError(f"{path}: not a head checkpoint (bad magic)")
    offset = len(CHECKPOINT_MAGIC)
    version, d_raw, d, receptive, stride, dropout, seed, step = struct.unpack_from(
        "<HIIIIdQQ", data, offset
    )
    offset += struct.calcsize("<HIIIIdQQ")
    if version != CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {version}")

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        n = int(np.prod(shape))
        arr = np.frombuffer(data[offset : offset + 4 * n], dtype="<f4")
        if arr.size != n:
            raise ValidationError(f"{path}: truncated checkpoint")
        offset += 4 * n
        return arr.astype(float).reshape(shape)

    params = HeadParams(
        conv_w=take((d_raw, receptive)),
        conv_b=take((d_raw,)),
        proj_w=take((d_raw, d)),
        proj_b=take((d,)),
        stride=stride,
        dropout=dropout,
        seed=seed,
    )
    if offset != len(data):
        raise ValidationError(f"{path}: trailing bytes in checkpoint")
    return params, step


def checkpoint_fingerprint(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
