"""Gaussian question-weight rows and anchor construction."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qseek import oracles
from qseek.errors import ValidationError
from qseek.gaussian import (
    FIXED,
    VARYING,
    GaussianConfig,
    anchor_embeddings,
    chunk_means,
    gaussian_weight_matrix,
)

FIXED_CFG = GaussianConfig(mode=FIXED, sigma=0.5)


class TestWeightMatrix:
    def test_five_chunks_three_questions(self):
        result = gaussian_weight_matrix(5, 3, FIXED_CFG)
        np.testing.assert_allclose(result.mus, [0.0, 0.5, 1.0, 1.5, 2.0])
        # row 1: densities (1, e^-2, e^-8) min-max normalized
        want = (math.exp(-2.0) - math.exp(-8.0)) / (1.0 - math.exp(-8.0))
        np.testing.assert_allclose(result.weights[0], [1.0, want, 0.0], atol=1e-12)
        assert abs(want - 0.1350) < 1e-4
        np.testing.assert_allclose(result.weights[2], [0.0, 1.0, 0.0], atol=1e-12)

    def test_two_chunks_two_questions_any_sigma(self):
        for sigma in (0.2, 0.5, 1.0, 3.0):
            result = gaussian_weight_matrix(2, 2, GaussianConfig(mode=FIXED, sigma=sigma))
            np.testing.assert_array_equal(result.weights, [[1.0, 0.0], [0.0, 1.0]])

    def test_symmetric_degenerate_row_is_uniform(self):
        result = gaussian_weight_matrix(3, 2, FIXED_CFG)
        np.testing.assert_array_equal(result.weights[1], [1.0, 1.0])

    def test_varying_mode_clamps_peripheral_sigma(self):
        result = gaussian_weight_matrix(5, 4, GaussianConfig(mode=VARYING, alpha=0.5))
        np.testing.assert_allclose(result.sigmas, [1e-3, 0.5, 1.0, 0.5, 1e-3])

    def test_single_chunk_sits_at_midpoint(self):
        result = gaussian_weight_matrix(1, 4, FIXED_CFG)
        assert result.mus[0] == 1.5
        np.testing.assert_allclose(result.weights[0], result.weights[0][::-1])

    def test_bad_args(self):
        with pytest.raises(ValidationError):
            gaussian_weight_matrix(0, 3, FIXED_CFG)
        with pytest.raises(ValidationError):
            GaussianConfig(mode=FIXED, sigma=0.0)
        with pytest.raises(ValidationError):
            GaussianConfig(mode="other")

    def test_oracle_agreement_spot(self):
        for n_s, m in ((1, 1), (2, 5), (7, 3), (14, 5), (30, 8)):
            for cfg in (FIXED_CFG, GaussianConfig(mode=VARYING, alpha=0.4)):
                got = gaussian_weight_matrix(n_s, m, cfg).weights
                want = oracles.brute_force_density_matrix(
                    n_s, m, cfg.mode, sigma=cfg.sigma, alpha=cfg.alpha
                )
                np.testing.assert_allclose(got, want, atol=1e-12)


@st.composite
def weight_configs(draw):
    n_s = draw(st.integers(1, 30))
    m = draw(st.integers(1, 8))
    if draw(st.booleans()):
        cfg = GaussianConfig(mode=FIXED, sigma=draw(st.floats(0.05, 4.0)))
    else:
        cfg = GaussianConfig(mode=VARYING, alpha=draw(st.floats(0.05, 1.5)))
    return n_s, m, cfg


class TestRowProperties:
    @settings(max_examples=300, derandomize=True)
    @given(weight_configs())
    def test_entries_argmax_unimodal(self, config):
        n_s, m, cfg = config
        result = gaussian_weight_matrix(n_s, m, cfg)
        weights = result.weights
        assert weights.min() >= 0.0 and weights.max() <= 1.0
        for i in range(n_s):
            row = weights[i]
            assert row.max() == 1.0
            lo = min(max(math.floor(result.mus[i]), 0), m - 1)
            hi = min(max(math.ceil(result.mus[i]), 0), m - 1)
            assert row[lo] == 1.0 or row[hi] == 1.0
            j = int(np.argmax(row))
            diffs = np.diff(row)
            assert (diffs[:j] >= 0).all() and (diffs[j:] <= 0).all()

    @settings(max_examples=200, derandomize=True)
    @given(weight_configs())
    def test_boundary_rows_anchor_to_ends(self, config):
        n_s, m, cfg = config
        if n_s < 2:
            return
        weights = gaussian_weight_matrix(n_s, m, cfg).weights
        assert weights[0, 0] == weights[0].max()
        assert weights[-1, m - 1] == weights[-1].max()

    @settings(max_examples=200, derandomize=True)
    @given(weight_configs())
    def test_scale_invariance_of_min_max(self, config):
        # normalized vs unnormalized density: min-max cancels any positive
        # scale, so dividing by sigma*sqrt(2*pi) changes nothing
        n_s, m, cfg = config
        result = gaussian_weight_matrix(n_s, m, cfg)
        x = np.arange(m, dtype=float)
        z = (x[None, :] - result.mus[:, None]) / result.sigmas[:, None]
        dens = np.exp(-0.5 * z * z) / (result.sigmas[:, None] * np.sqrt(2 * np.pi))
        lo, hi = dens.min(axis=1, keepdims=True), dens.max(axis=1, keepdims=True)
        span = np.where(hi - lo == 0.0, 1.0, hi - lo)
        normalized = (dens - lo) / span
        normalized[(hi - lo == 0.0).ravel(), :] = 1.0
        np.testing.assert_allclose(result.weights, normalized, atol=1e-12)

    @settings(max_examples=150, derandomize=True)
    @given(st.integers(2, 30), st.integers(1, 8), st.floats(0.1, 3.0))
    def test_fixed_sigma_symmetry(self, n_s, m, sigma):
        weights = gaussian_weight_matrix(n_s, m, GaussianConfig(mode=FIXED, sigma=sigma)).weights
        rotated = weights[::-1, ::-1]
        np.testing.assert_allclose(weights, rotated, atol=1e-12)

    def test_mean_spacing_matches_formula(self):
        for n_s in range(2, 31):
            for m in range(1, 9):
                mus = chunk_means(n_s, m)
                for i in range(n_s):
                    assert mus[i] == (i * (m - 1)) / (n_s - 1)


class TestAnchors:
    def test_one_hot_row_selects_question(self):
        result = gaussian_weight_matrix(2, 2, FIXED_CFG)  # rows are one-hot
        q = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        anchors = anchor_embeddings(result, q)
        np.testing.assert_array_equal(anchors[0], q[0])
        np.testing.assert_array_equal(anchors[1], q[1])

    def test_linear_combination(self):
        from qseek.gaussian import GaussianWeightMatrix

        matrix = GaussianWeightMatrix(
            weights=np.array([[1.0, 0.5]]), mus=np.zeros(1), sigmas=np.ones(1)
        )
        q = np.eye(2, 5)
        anchors = anchor_embeddings(matrix, q)
        np.testing.assert_array_equal(anchors[0], [1.0, 0.5, 0.0, 0.0, 0.0])

    def test_matches_brute_force_matmul(self):
        rng = np.random.default_rng(7)
        from qseek.gaussian import GaussianWeightMatrix

        weights = rng.uniform(size=(4, 3))
        q = rng.normal(size=(3, 5))
        matrix = GaussianWeightMatrix(weights=weights, mus=np.zeros(4), sigmas=np.ones(4))
        got = anchor_embeddings(matrix, q)
        want = oracles.brute_force_matmul(weights, q)
        np.testing.assert_allclose(got, want, atol=1e-9)

    def test_dimension_mismatch(self):
        result = gaussian_weight_matrix(3, 4, FIXED_CFG)
        with pytest.raises(ValidationError):
            anchor_embeddings(result, np.zeros((3, 5)))

    def test_anchor_in_question_span(self):
        rng = np.random.default_rng(3)
        result = gaussian_weight_matrix(6, 4, FIXED_CFG)
        q = rng.normal(size=(4, 7))
        anchors = anchor_embeddings(result, q)
        # each anchor is expressible in the question basis
        coeffs, residuals, *_ = np.linalg.lstsq(q.T, anchors.T, rcond=None)
        reconstructed = (q.T @ coeffs).T
        np.testing.assert_allclose(reconstructed, anchors, atol=1e-9)
