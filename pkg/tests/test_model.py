"""Core linear machinery: shrinkage factors, WLS, and the predictor matrix."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbpsae import (
    AreaDataset,
    SingularDesignError,
    combine,
    mle_weights,
    predictor_matrix,
    shrinkage_factors,
    tau_upper_bound,
    wls_beta,
)
from cbpsae.weights import WeightVector, uniform_weights


def random_dataset(rng, k=8, p=2):
    x = np.column_stack([np.ones(k), rng.normal(size=(k, p - 1))]) if p > 1 else np.ones((k, 1))
    return AreaDataset(
        y=rng.normal(0, 2, k),
        x=x,
        sigma2=rng.uniform(0.2, 3.0, k),
    )


class TestShrinkageFactors:
    def test_tau_zero_gives_one(self):
        assert shrinkage_factors([1.0], 0.0).b[0] == 1.0

    def test_equal_scales_give_half(self):
        assert shrinkage_factors([1.0], 1.0).b[0] == pytest.approx(0.5)

    def test_arithmetic_oracle(self):
        # sigma2 = (2, 0.5) with tau^2 = 2: direct evaluation gives (0.5, 0.2)
        out = shrinkage_factors([2.0, 0.5], np.sqrt(2.0))
        np.testing.assert_allclose(out.b, [0.5, 0.2], rtol=1e-14)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            shrinkage_factors([1.0, 0.0], 1.0)
        with pytest.raises(ValueError):
            shrinkage_factors([1.0, -2.0], 1.0)

    def test_rejects_negative_tau(self):
        with pytest.raises(ValueError):
            shrinkage_factors([1.0], -0.5)

    @given(
        s2=st.floats(min_value=1e-3, max_value=1e3),
        t1=st.floats(min_value=0.0, max_value=50.0),
        t2=st.floats(min_value=0.0, max_value=50.0),
    )
    def test_strictly_decreasing_in_tau(self, s2, t1, t2):
        lo, hi = sorted([t1, t2], key=lambda t: t * t)
        if s2 + lo * lo == s2 + hi * hi:  # indistinguishable in float64
            return
        b_lo = shrinkage_factors([s2], lo).b[0]
        b_hi = shrinkage_factors([s2], hi).b[0]
        assert b_hi < b_lo
        assert 0.0 <= b_hi <= 1.0


class TestWlsBeta:
    def test_uniform_weight_mean(self):
        d = AreaDataset(y=[1.0, 2.0, 3.0], x=np.ones((3, 1)), sigma2=[1, 1, 1])
        out = wls_beta(d, uniform_weights(3))
        np.testing.assert_allclose(out.beta, [2.0], atol=1e-14)

    def test_weighted_mean(self):
        d = AreaDataset(y=[4.0, 0.0, 0.0], x=np.ones((3, 1)), sigma2=[1, 1, 1])
        out = wls_beta(d, WeightVector([0.5, 0.25, 0.25]))
        np.testing.assert_allclose(out.beta, [2.0], atol=1e-14)

    def test_matches_brute_force_normal_equations(self):
        rng = np.random.default_rng(11)
        d = random_dataset(rng, k=4, p=2)
        w = rng.uniform(0.1, 1.0, 4)
        w /= w.sum()
        # Independent oracle: assemble and solve the 2x2 normal equations
        # entry by entry.
        a = np.zeros((2, 2))
        rhs = np.zeros(2)
        for k in range(4):
            for i in range(2):
                rhs[i] += w[k] * d.x[k, i] * d.y[k]
                for j in range(2):
                    a[i, j] += w[k] * d.x[k, i] * d.x[k, j]
        expected = np.linalg.solve(a, rhs)
        out = wls_beta(d, WeightVector(w))
        np.testing.assert_allclose(out.beta, expected, rtol=1e-12)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(5)
        d = random_dataset(rng, k=12, p=3)
        w = WeightVector(rng.uniform(0.1, 1, 12))
        beta = wls_beta(d, w)
        resid = d.y - d.x @ beta.beta
        np.testing.assert_allclose(d.x.T @ (np.asarray(w) * resid), 0, atol=1e-12)

    def test_scaling_weights_leaves_beta_unchanged(self):
        rng = np.random.default_rng(6)
        d = random_dataset(rng, k=9, p=2)
        w = rng.uniform(0.1, 1, 9)
        b1 = wls_beta(d, WeightVector(w))
        b2 = wls_beta(d, WeightVector(17.3 * w))
        np.testing.assert_allclose(b1.beta, b2.beta, rtol=1e-13)

    def test_duplicate_column_raises_naming_columns(self):
        rng = np.random.default_rng(7)
        base = rng.normal(size=6)
        x = np.column_stack([np.ones(6), base, base])
        d = AreaDataset(y=rng.normal(size=6), x=x, sigma2=np.ones(6))
        with pytest.raises(SingularDesignError) as err:
            wls_beta(d, uniform_weights(6))
        assert len(err.value.columns) >= 1
        assert all(c in (0, 1, 2) for c in err.value.columns)


class TestPredictorMatrix:
    def test_two_area_hand_matrix(self):
        # Intercept-only, equal weights, tau = 0: U = J/2 - I.
        d = AreaDataset(y=[0.0, 0.0], x=np.ones((2, 1)), sigma2=[1.0, 1.0])
        u = predictor_matrix(d, uniform_weights(2), 0.0)
        np.testing.assert_allclose(u.u, [[-0.5, 0.5], [0.5, -0.5]], atol=1e-14)

    def test_large_tau_kills_shrinkage(self):
        rng = np.random.default_rng(8)
        d = random_dataset(rng, k=6, p=2)
        u = predictor_matrix(d, uniform_weights(6), 1e9)
        np.testing.assert_allclose(u.u, 0, atol=1e-12)
        theta = (u.u + np.eye(6)) @ d.y
        np.testing.assert_allclose(theta, d.y, atol=1e-10)

    def test_annihilates_design(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            d = random_dataset(rng, k=10, p=3)
            w = WeightVector(rng.uniform(0.05, 1, 10))
            u = predictor_matrix(d, w, rng.uniform(0, 3))
            np.testing.assert_allclose(
                u.u @ d.x, 0, atol=1e-8 * max(1.0, np.abs(d.x).max())
            )

    def test_matches_direct_combination(self):
        # (U + I) Y coordinates equal B x'beta + (1 - B) Y computed separately.
        rng = np.random.default_rng(10)
        d = random_dataset(rng, k=5, p=2)
        w = WeightVector(rng.uniform(0.1, 1, 5))
        tau = 0.8
        u = predictor_matrix(d, w, tau)
        via_u = (u.u + np.eye(5)) @ d.y
        beta = wls_beta(d, w)
        b = d.sigma2 / (d.sigma2 + tau**2)
        direct = b * (d.x @ beta.beta) + (1 - b) * d.y
        np.testing.assert_allclose(via_u, direct, atol=1e-12)


class TestCombine:
    def test_full_shrinkage_at_tau_zero(self):
        rng = np.random.default_rng(12)
        d = random_dataset(rng, k=7, p=2)
        beta = wls_beta(d, mle_weights(d.sigma2, 0.0))
        np.testing.assert_allclose(combine(d, beta, 0.0), d.x @ beta.beta, atol=1e-14)

    def test_midpoint(self):
        d = AreaDataset(y=[4.0], x=np.array([[2.0]]), sigma2=[1.0])
        # B = 1/2 at tau = 1, x'beta = 2 -> midpoint 3.
        out = combine(d, np.array([1.0]), 1.0)
        assert out[0] == pytest.approx(3.0)

    def test_agrees_with_predictor_matrix_route(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            d = random_dataset(rng, k=int(rng.integers(3, 20)), p=2)
            w = WeightVector(rng.uniform(0.05, 1, d.k))
            tau = float(rng.uniform(0, 5))
            beta = wls_beta(d, w)
            via_combine = combine(d, beta, tau)
            u = predictor_matrix(d, w, tau)
            np.testing.assert_allclose(
                via_combine, (u.u + np.eye(d.k)) @ d.y, atol=1e-10
            )

    def test_convex_combination_bounds(self):
        rng = np.random.default_rng(14)
        d = random_dataset(rng, k=15, p=3)
        w = WeightVector(rng.uniform(0.05, 1, 15))
        tau = 1.3
        beta = wls_beta(d, w)
        theta = combine(d, beta, tau)
        reg = d.x @ beta.beta
        lo = np.minimum(reg, d.y) - 1e-12
        hi = np.maximum(reg, d.y) + 1e-12
        assert np.all(theta >= lo) and np.all(theta <= hi)

    def test_dimension_mismatch(self):
        d = AreaDataset(y=[1.0, 2.0], x=np.ones((2, 1)), sigma2=[1, 1])
        with pytest.raises(ValueError):
            combine(d, np.array([1.0, 2.0]), 0.5)


class TestTauUpperBound:
    def test_ten_sample_sds(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        assert tau_upper_bound(y) == pytest.approx(10 * np.std(y, ddof=1))

    def test_degenerate_fallback(self):
        assert tau_upper_bound([2.0, 2.0, 2.0]) == 1.0
        assert tau_upper_bound([5.0]) == 1.0
