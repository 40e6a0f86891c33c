"""Independent brute-force oracles.

Everything here is deliberately written as straight-line scalar Python
(math.exp/log, double loops, fractions) and shares no numerical code with
the modules it checks. These functions are slow on purpose; they exist to
pin down expected values, not to be used in the pipeline.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


# -- gaussian weight rows (checks qseek.gaussian) --


def brute_force_density_matrix(
    n_s: int,
    m: int,
    mode: str,
    sigma: float = 0.5,
    alpha: float = 0.5,
    sigma_floor: float = 1e-3,
) -> np.ndarray:
    """Scalar re-derivation of the per-chunk question-weight rows."""
    rows = []
    for i in range(1, n_s + 1):
        if n_s == 1:
            mu = (m - 1) / 2.0
        else:
            mu = ((i - 1) * (m - 1)) / (n_s - 1)
        if mode == "fixed_sigma":
            sig = sigma
        elif mode == "varying_alpha":
            sig = alpha * min(i - 1, n_s - i)
            if sig < sigma_floor:
                sig = sigma_floor
        else:
            raise ValueError(f"unknown mode {mode!r}")
        samples = []
        for j in range(m):
            z = (j - mu) / sig
            try:
                samples.append(math.exp(-0.5 * z * z))
            except OverflowError:
                samples.append(0.0)
        lo = min(samples)
        hi = max(samples)
        if hi == lo:
            rows.append([1.0] * m)
        else:
            rows.append([(s - lo) / (hi - lo) for s in samples])
    return np.array(rows)


def exact_mu_fraction(i: int, n_s: int, m: int) -> Fraction:
    """mu for chunk i (0-based) as an exact rational; n_s >= 2."""
    return Fraction(i * (m - 1), n_s - 1)


# -- matrix products (checks anchor construction and attention) --


def brute_force_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += float(a[i, k]) * float(b[k, j])
            out[i, j] = acc
    return out


def brute_force_self_attention(c: np.ndarray) -> np.ndarray:
    """softmax(C C^T / sqrt(d)) C + C, scalar loops throughout."""
    n, d = c.shape
    scale = math.sqrt(d)
    out = np.zeros_like(c, dtype=float)
    for i in range(n):
        logits = [
            sum(float(c[i, k]) * float(c[j, k]) for k in range(d)) / scale for j in range(n)
        ]
        peak = max(logits)
        expv = [math.exp(v - peak) for v in logits]
        total = sum(expv)
        attn = [e / total for e in expv]
        for k in range(d):
            mix = sum(attn[j] * float(c[j, k]) for j in range(n))
            out[i, k] = float(c[i, k]) + mix
    return out


# -- contrastive losses (checks qseek.training) --


def brute_force_smoothed_ce(logits: list[float], targets: list[float]) -> float:
    peak = max(logits)
    expv = [math.exp(v - peak) for v in logits]
    total = sum(expv)
    return -sum(t * math.log(e / total) for t, e in zip(targets, expv))


def brute_force_loss_st(
    chunk_embs: dict[tuple[int, int], np.ndarray],
    anchors: dict[tuple[int, int], np.ndarray],
    negatives: dict[tuple[int, int], list[tuple[int, int]]],
    targets: list[float],
) -> float:
    """Mean smoothed CE over chunks; anchor fixed, candidates = self + negatives."""
    total = 0.0
    for key, anchor in anchors.items():
        cands = [chunk_embs[key]] + [chunk_embs[n] for n in negatives[key]]
        logits = [float(sum(c[k] * anchor[k] for k in range(len(anchor)))) for c in cands]
        total += brute_force_smoothed_ce(logits, targets)
    return total / len(anchors)


def brute_force_loss_ss(
    chunk_embs: dict[tuple[int, int], np.ndarray],
    negatives: dict[tuple[int, int], list[tuple[int, int]]],
    targets: list[float],
) -> float:
    anchors = {key: chunk_embs[key] for key in negatives}
    return brute_force_loss_st(chunk_embs, anchors, negatives, targets)


# -- gradients (checks the analytic backprop) --


def finite_difference_gradients(
    loss_fn,
    params: dict[str, np.ndarray],
    eps: float = 1e-4,
) -> dict[str, np.ndarray]:
    """Central differences per scalar parameter. ``loss_fn`` must be pure."""
    grads: dict[str, np.ndarray] = {}
    for name, tensor in params.items():
        grad = np.zeros_like(tensor, dtype=float)
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            hi = loss_fn(params)
            flat[idx] = original - eps
            lo = loss_fn(params)
            flat[idx] = original
            gflat[idx] = (hi - lo) / (2.0 * eps)
        grads[name] = grad
    return grads


# -- retrieval scoring and metrics (checks qseek.retrieval) --


def brute_force_rank_segments(
    q: np.ndarray, embeddings: np.ndarray, segmentation: list[tuple[int, int]]
) -> list[int]:
    """Segment indices best-first: max chunk dot per segment, ties by index."""
    scores = []
    for lo, hi in segmentation:
        best = None
        for i in range(lo, hi):
            dot = float(sum(float(q[k]) * float(embeddings[i, k]) for k in range(len(q))))
            if best is None or dot > best:
                best = dot
        scores.append(best)
    order = sorted(range(len(segmentation)), key=lambda s: (-scores[s], s))
    return order


def brute_force_recall_at_k(
    rankings: dict[str, list[int]], truth: dict[str, int], k: int
) -> float:
    """Fraction of questions whose true segment appears in the top k."""
    hits = 0
    for qid, true_seg in truth.items():
        if true_seg in rankings[qid][:k]:
            hits += 1
    return hits / len(truth)
