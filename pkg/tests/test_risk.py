"""Unbiased risk estimates and exact MSPE evaluation."""

import numpy as np
import pytest

from cbpsae import (
    AreaDataset,
    bpe_weights,
    compromise_risk,
    compromise_weights,
    fay_herriot_model,
    general_mspe_estimate,
    mle_weights,
    mspe_estimate,
    mspe_true,
    predictor_matrix,
)
from cbpsae.risk import compromise_risk_grid, mspe_grid_wb
from cbpsae.weights import WeightVector, uniform_weights


def small_dataset(rng, k=8, p=2):
    x = np.column_stack([np.ones(k), rng.normal(size=(k, p - 1))]) if p > 1 else np.ones((k, 1))
    return AreaDataset(y=rng.normal(0, 1.5, k), x=x, sigma2=rng.uniform(0.3, 2.5, k))


class TestMspeEstimate:
    def test_hand_computed_two_area_case(self):
        # Intercept-only, equal weights, tau = 0, Y = (1, -1), sigma2 = (1, 1):
        # U = J/2 - I so quad = 2, 2 tr(UV) = -2, tr(V) = 2 and the total is 2.
        d = AreaDataset(y=[1.0, -1.0], x=np.ones((2, 1)), sigma2=[1.0, 1.0])
        out = mspe_estimate(d, uniform_weights(2), 0.0)
        assert out.value == pytest.approx(2.0, abs=1e-14)
        assert out.components["quadratic"] == pytest.approx(2.0)
        assert out.components["trace_cross"] == pytest.approx(-2.0)
        assert out.components["trace_noise"] == pytest.approx(2.0)

    def test_large_tau_limit_is_total_noise(self):
        rng = np.random.default_rng(0)
        d = small_dataset(rng)
        out = mspe_estimate(d, uniform_weights(d.k), 1e9)
        assert out.value == pytest.approx(d.sigma2.sum(), rel=1e-9)

    def test_components_sum_to_value(self):
        rng = np.random.default_rng(1)
        d = small_dataset(rng)
        out = mspe_estimate(d, mle_weights(d.sigma2, 0.6), 0.6)
        assert out.value == pytest.approx(sum(out.components.values()))

    def test_matches_explicit_u_matrix_route(self):
        rng = np.random.default_rng(2)
        for _ in range(8):
            d = small_dataset(rng, k=int(rng.integers(4, 15)))
            w = WeightVector(rng.uniform(0.05, 1, d.k))
            tau = float(rng.uniform(0, 3))
            u = predictor_matrix(d, w, tau).u
            v = np.diag(d.sigma2)
            expected = (
                d.y @ u.T @ u @ d.y + 2 * np.trace(u @ v) + np.trace(v)
            )
            got = mspe_estimate(d, w, tau).value
            assert got == pytest.approx(expected, rel=1e-11)

    def test_unbiasedness_monte_carlo(self):
        # Fixed (w, tau): the mean of the estimate over simulated datasets
        # matches the exact MSPE within Monte Carlo error.
        rng = np.random.default_rng(3)
        k = 12
        x = np.column_stack([np.ones(k), rng.normal(size=k)])
        sigma2 = rng.uniform(0.4, 1.6, k)
        mu = x @ np.array([1.0, 0.5]) + rng.normal(0, 0.3, k)  # misspecified
        tau0 = 0.8
        w = WeightVector(rng.uniform(0.2, 1, k))
        tau = 0.5
        truth = mspe_true(x, sigma2, mu, tau0, w, tau).value

        n_rep = 20000
        v = rng.normal(0, tau0, (n_rep, k))
        e = rng.normal(0, 1, (n_rep, k)) * np.sqrt(sigma2)
        ymat = mu + v + e
        u = predictor_matrix(
            AreaDataset(y=mu, x=x, sigma2=sigma2), w, tau
        ).u
        utu = u.T @ u
        quad = np.einsum("ji,ik,jk->j", ymat, utu, ymat)
        const = 2 * np.trace(u @ np.diag(sigma2)) + sigma2.sum()
        vals = quad + const
        se = vals.std(ddof=1) / np.sqrt(n_rep)
        assert abs(vals.mean() - truth) < 3 * se


class TestMspeTrue:
    def test_bias_term_zero_when_mean_in_span(self):
        rng = np.random.default_rng(4)
        k = 9
        x = np.column_stack([np.ones(k), rng.normal(size=k)])
        mu = x @ np.array([2.0, -1.0])
        out = mspe_true(
            x, np.ones(k), mu, 0.7, WeightVector(rng.uniform(0.1, 1, k)), 0.9
        )
        assert out.components["bias"] == pytest.approx(0.0, abs=1e-16)

    def test_no_shrinkage_limit(self):
        rng = np.random.default_rng(5)
        k = 6
        x = np.ones((k, 1))
        sigma2 = rng.uniform(0.5, 2, k)
        out = mspe_true(x, sigma2, rng.normal(size=k), 1.0, uniform_weights(k), 1e9)
        assert out.value == pytest.approx(sigma2.sum(), rel=1e-9)

    def test_matches_empirical_squared_error(self):
        rng = np.random.default_rng(6)
        k = 5
        x = np.column_stack([np.ones(k), rng.normal(size=k)])
        sigma2 = rng.uniform(0.3, 1.2, k)
        mu = rng.normal(0, 1, k)
        tau0 = 0.6
        w = WeightVector(rng.uniform(0.1, 1, k))
        tau = 1.1
        truth = mspe_true(x, sigma2, mu, tau0, w, tau).value

        n_rep = 100_000
        v = rng.normal(0, tau0, (n_rep, k))
        e = rng.normal(0, 1, (n_rep, k)) * np.sqrt(sigma2)
        theta = mu + v
        ymat = theta + e
        u = predictor_matrix(AreaDataset(y=mu, x=x, sigma2=sigma2), w, tau).u
        pred = ymat @ (u + np.eye(k)).T
        sq = ((pred - theta) ** 2).sum(axis=1)
        se = sq.std(ddof=1) / np.sqrt(n_rep)
        assert abs(sq.mean() - truth) < 3 * se

    def test_decomposition_term_ordering(self):
        # Variance piece smallest at precision weights; bias piece zero at
        # prediction weights if and only if the mean is fit exactly, and
        # smallest at prediction weights under misspecification.
        rng = np.random.default_rng(7)
        k = 20
        x = np.ones((k, 1))
        sigma2 = rng.uniform(0.2, 3.0, k)
        tau0 = 0.9
        mu = rng.normal(0, 1, k) + np.linspace(-1, 1, k) * sigma2
        cands = {
            "mle": mle_weights(sigma2, tau0),
            "bpe": bpe_weights(sigma2, tau0),
            "mix": compromise_weights(sigma2, 0.5, tau0),
        }
        bias = {}
        varpart = {}
        for name, w in cands.items():
            out = mspe_true(x, sigma2, mu, tau0, w, tau0)
            bias[name] = out.components["bias"]
            varpart[name] = (
                out.components["noise_variance"] + out.components["effect_variance"]
            )
        assert varpart["mle"] == min(varpart.values())
        assert bias["bpe"] == min(bias.values())
        assert bias["bpe"] > 0


class TestCompromiseRisk:
    def test_endpoint_identities(self):
        rng = np.random.default_rng(8)
        d = small_dataset(rng)
        tau = 0.7
        assert compromise_risk(d, 1.0, tau).value == pytest.approx(
            mspe_estimate(d, mle_weights(d.sigma2, tau), tau).value, rel=1e-13
        )
        assert compromise_risk(d, 0.0, tau).value == pytest.approx(
            mspe_estimate(d, bpe_weights(d.sigma2, tau), tau).value, rel=1e-13
        )

    def test_composition_is_bit_for_bit(self):
        rng = np.random.default_rng(9)
        d = small_dataset(rng)
        alpha, tau = 0.37, 1.21
        direct = mspe_estimate(d, compromise_weights(d.sigma2, alpha, tau), tau)
        assert compromise_risk(d, alpha, tau).value == direct.value

    def test_grid_matches_scalar_evaluations(self):
        rng = np.random.default_rng(10)
        d = small_dataset(rng, k=11, p=3)
        alphas = np.linspace(0, 1, 5)
        taus = np.array([0.0, 0.4, 1.9])
        grid = compromise_risk_grid(d, alphas, taus)
        for i, a in enumerate(alphas):
            for j, t in enumerate(taus):
                assert grid[i, j] == pytest.approx(
                    compromise_risk(d, a, t).value, rel=1e-11
                )


class TestGeneralRiskReduction:
    def test_reduces_to_area_level_estimate(self):
        # Z = I, G = tau^2 I, Sigma = diag(sigma2), A = R = I with a diagonal
        # weight matrix must reproduce the area-level risk estimate exactly.
        rng = np.random.default_rng(11)
        for _ in range(5):
            d = small_dataset(rng, k=7, p=2)
            w = WeightVector(rng.uniform(0.1, 1, 7))
            tau = float(rng.uniform(0, 2))
            gm = fay_herriot_model(d, 10.0)
            got = general_mspe_estimate(gm, np.diag(np.asarray(w)), [tau]).value
            want = mspe_estimate(d, w, tau).value
            assert got == pytest.approx(want, rel=1e-10, abs=1e-10)

    def test_zero_targets_give_zero(self):
        rng = np.random.default_rng(12)
        d = small_dataset(rng, k=5)
        gm = fay_herriot_model(d, 10.0)
        from cbpsae import GeneralModel

        zeroed = GeneralModel(
            y=gm.y, x=gm.x, z=gm.z, sigma_mat=gm.sigma_mat,
            g_of_lambda=gm.g_of_lambda, lambda_domain=gm.lambda_domain,
            a_mat=np.zeros((5, 1)), r_mat=np.zeros((5, 1)),
        )
        out = general_mspe_estimate(zeroed, np.eye(5), [0.8])
        assert out.value == pytest.approx(0.0, abs=1e-14)


class TestGridEvaluator:
    def test_scale_invariance_in_weights(self):
        rng = np.random.default_rng(13)
        d = small_dataset(rng, k=9)
        w = rng.uniform(0.1, 1, (3, 9))
        b = rng.uniform(0.1, 0.9, (3, 9))
        a = mspe_grid_wb(d.y, d.x, d.sigma2, w, b)
        bvals = mspe_grid_wb(d.y, d.x, d.sigma2, 7.7 * w, b)
        np.testing.assert_allclose(a, bvals, rtol=1e-11)
