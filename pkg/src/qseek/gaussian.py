"""Position-dependent Gaussian question weights and anchor embeddings.

For a segment of n_s chunks and m ordered questions, chunk i gets a weight
row over the questions: a normal density with mean mu_i (sliding linearly
from question 0 to question m-1) and std sigma_i, sampled at the integer
question positions and min-max normalized per row. The weighted sum of the
segment's question embeddings is the chunk's cross-modal anchor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

FIXED = "fixed_sigma"
VARYING = "varying_alpha"


@dataclass(frozen=True)
class GaussianConfig:
    mode: str = FIXED
    sigma: float = 0.5
    alpha: float = 0.5
    sigma_floor: float = 1e-3

    def __post_init__(self) -> None:
        if self.mode not in (FIXED, VARYING):
            raise ValidationError(f"unknown gaussian mode {self.mode!r}")
        if self.mode == FIXED and self.sigma <= 0:
            raise ValidationError("fixed mode requires sigma > 0")
        if self.mode == VARYING and self.alpha <= 0:
            raise ValidationError("varying mode requires alpha > 0")
        if self.sigma_floor <= 0:
            raise ValidationError("sigma_floor must be > 0")


@dataclass(frozen=True)
class GaussianWeightMatrix:
    """Row-wise min-max-normalized weights, one row per chunk."""

    weights: np.ndarray  # (n_s, m), entries in [0, 1]
    mus: np.ndarray  # (n_s,)
    sigmas: np.ndarray  # (n_s,)

    @property
    def n_s(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]


def chunk_means(n_s: int, m: int) -> np.ndarray:
    """Means mu_i = i*(m-1)/(n_s-1) for i = 0..n_s-1.

    Computed as one division of exact small integers, so each value is the
    correctly rounded float of the exact rational and consecutive means
    shift by exactly (m-1)/(n_s-1) at the rational level. A single chunk
    has no slide to define, so it sits at the midpoint (m-1)/2.
    """
    if n_s == 1:
        return np.array([(m - 1) / 2.0])
    return (np.arange(n_s) * (m - 1)) / (n_s - 1)


def chunk_sigmas(n_s: int, cfg: GaussianConfig) -> np.ndarray:
    """Per-chunk std. Varying mode shrinks toward the segment edges and is
    clamped to ``sigma_floor`` where it would hit zero (peripheral chunks)."""
    if cfg.mode == FIXED:
        return np.full(n_s, float(cfg.sigma))
    i = np.arange(1, n_s + 1, dtype=float)
    sig = cfg.alpha * np.minimum(i - 1, n_s - i)
    return np.maximum(sig, cfg.sigma_floor)


def gaussian_weight_matrix(n_s: int, m: int, cfg: GaussianConfig) -> GaussianWeightMatrix:
    """Weight rows for all chunks of one segment.

    Uses the unnormalized kernel exp(-(x-mu)^2 / (2 sigma^2)); the density
    constant cancels under min-max normalization. A row whose samples are
    all equal (symmetric degenerate case, or total underflow) falls back to
    uniform ones so every question keeps equal weight.
    """
    if n_s < 1 or m < 1:
        raise ValidationError(f"n_s and m must be >= 1, got ({n_s}, {m})")
    mus = chunk_means(n_s, m)
    sigmas = chunk_sigmas(n_s, cfg)
    x = np.arange(m, dtype=float)
    z = (x[None, :] - mus[:, None]) / sigmas[:, None]
    dens = np.exp(-0.5 * z * z)
    lo = dens.min(axis=1, keepdims=True)
    hi = dens.max(axis=1, keepdims=True)
    span = hi - lo
    flat = span == 0.0
    weights = (dens - lo) / np.where(flat, 1.0, span)
    weights[flat.ravel(), :] = 1.0
    return GaussianWeightMatrix(weights=weights, mus=mus, sigmas=sigmas)


def anchor_embeddings(matrix: GaussianWeightMatrix, question_embeddings: np.ndarray) -> np.ndarray:
    """Anchors = weights @ question embeddings, one d-vector per chunk."""
    q = np.asarray(question_embeddings, dtype=float)
    if q.ndim != 2 or q.shape[0] != matrix.m:
        raise ValidationError(
            f"question embedding matrix must be ({matrix.m}, d), got {q.shape}"
        )
    return matrix.weights @ q
