"""Variance-component estimators against closed forms and grid oracles."""

import numpy as np
import pytest

from cbpsae import (
    AreaDataset,
    InsufficientDataError,
    shrinkage_factors,
    tau_mle,
    tau_obp,
    tau_reml,
    tau_upper_bound,
    tau_ure,
)
from cbpsae.variance import (
    obp_objective,
    profile_loglik,
    reml_loglik,
    ure_objective,
)


def balanced_dataset(rng, k=25, sigma2=1.3, spread=1.9):
    y = rng.normal(2.0, spread, k)
    return AreaDataset(y=y, x=np.ones((k, 1)), sigma2=np.full(k, sigma2))


def hetero_dataset(rng, k=40, p=1):
    x = np.column_stack([np.ones(k), rng.normal(size=(k, p - 1))]) if p > 1 else np.ones((k, 1))
    return AreaDataset(
        y=rng.normal(0, 1.5, k), x=x, sigma2=rng.uniform(0.2, 2.5, k)
    )


def grid_argmin(fn, data, n=200_001):
    taus = np.linspace(0.0, tau_upper_bound(data.y), n)
    vals = fn(data, taus)
    return taus[int(np.argmin(vals))]


class TestReml:
    def test_balanced_closed_form(self):
        rng = np.random.default_rng(7)
        d = balanced_dataset(rng)
        tau2 = max(0.0, np.var(d.y, ddof=1) - d.sigma2[0])
        est = tau_reml(d)
        assert est.tau**2 == pytest.approx(tau2, abs=2e-7)

    def test_constant_response_gives_zero(self):
        d = AreaDataset(y=np.full(10, 3.0), x=np.ones((10, 1)), sigma2=np.ones(10))
        assert tau_reml(d).tau == 0.0

    def test_matches_dense_grid(self):
        rng = np.random.default_rng(8)
        d = hetero_dataset(rng, k=40)
        est = tau_reml(d)
        grid = grid_argmin(lambda dd, t: -reml_loglik(dd, t), d)
        assert abs(est.tau - grid) <= 1e-4

    def test_requires_more_areas_than_columns(self):
        d = AreaDataset(y=[1.0], x=np.ones((1, 1)), sigma2=[1.0])
        with pytest.raises(InsufficientDataError):
            tau_reml(d)


class TestMle:
    def test_constant_response_gives_zero(self):
        d = AreaDataset(y=np.full(8, -1.0), x=np.ones((8, 1)), sigma2=np.ones(8))
        assert tau_mle(d).tau == 0.0

    def test_balanced_closed_form(self):
        rng = np.random.default_rng(9)
        d = balanced_dataset(rng, k=30)
        tau2 = max(0.0, np.var(d.y, ddof=0) - d.sigma2[0])
        est = tau_mle(d)
        assert est.tau**2 == pytest.approx(tau2, abs=2e-7)

    def test_matches_dense_grid(self):
        rng = np.random.default_rng(10)
        d = hetero_dataset(rng, k=35)
        est = tau_mle(d)
        grid = grid_argmin(lambda dd, t: -profile_loglik(dd, t), d)
        assert abs(est.tau - grid) <= 1e-4


class TestUre:
    def test_matches_dense_grid(self):
        rng = np.random.default_rng(11)
        d = hetero_dataset(rng, k=40)
        est = tau_ure(d)
        grid = grid_argmin(ure_objective, d)
        assert abs(est.tau - grid) <= 1e-4

    def test_single_area_boundary(self):
        # K = p: the fit interpolates, the criterion is flat, tie rule
        # returns the lower boundary.
        d = AreaDataset(y=[2.0], x=np.ones((1, 1)), sigma2=[1.0])
        est = tau_ure(d)
        assert est.tau == 0.0

    def test_interior_optimum_with_real_spread(self):
        rng = np.random.default_rng(12)
        k = 50
        n = np.exp(3.0 * np.arange(k) / (k - 1))
        sigma2 = 0.5 / n
        theta = rng.normal(0, 0.5, k)
        y = theta + rng.normal(0, np.sqrt(sigma2))
        d = AreaDataset(y=y, x=np.ones((k, 1)), sigma2=sigma2)
        est = tau_ure(d)
        assert 0.0 < est.tau < tau_upper_bound(y)


class TestObp:
    def test_matches_dense_grid(self):
        rng = np.random.default_rng(13)
        d = hetero_dataset(rng, k=40)
        est = tau_obp(d)
        grid = grid_argmin(obp_objective, d)
        assert abs(est.tau - grid) <= 1e-4

    def test_constant_response_gives_zero(self):
        # The quadratic piece vanishes for every tau, so the increasing
        # penalty 2 tau^2 tr(B) makes tau = 0 the minimizer.
        d = AreaDataset(y=np.full(12, 5.5), x=np.ones((12, 1)), sigma2=np.ones(12))
        est = tau_obp(d)
        assert est.tau == 0.0
        taus = np.linspace(0, 10, 50)
        vals = obp_objective(d, taus)
        assert np.all(np.diff(vals) >= 0)


class TestSharedContracts:
    def test_estimates_within_bounds(self):
        rng = np.random.default_rng(14)
        for maker in (balanced_dataset, hetero_dataset):
            d = maker(rng)
            cap = tau_upper_bound(d.y)
            for est in (tau_reml(d), tau_mle(d), tau_ure(d), tau_obp(d)):
                assert 0.0 <= est.tau <= cap
                assert np.isfinite(est.objective_at_opt)

    def test_beats_uniform_objective_grid(self):
        # Returned objective is at least as good as 201 equally spaced taus.
        rng = np.random.default_rng(15)
        d = hetero_dataset(rng, k=25)
        taus = np.linspace(0, tau_upper_bound(d.y), 201)
        checks = [
            (tau_reml(d), lambda t: -reml_loglik(d, t), -1.0),
            (tau_mle(d), lambda t: -profile_loglik(d, t), -1.0),
            (tau_ure(d), lambda t: ure_objective(d, t), 1.0),
            (tau_obp(d), lambda t: obp_objective(d, t), 1.0),
        ]
        for est, fn, sign in checks:
            assert sign * est.objective_at_opt <= fn(taus).min() + 1e-10

    def test_penalty_trace_identity(self):
        # sum_k [tau^2 B_k + sigma_k^2 B_k] = sum_k sigma_k^2 exactly.
        rng = np.random.default_rng(16)
        s2 = rng.uniform(0.1, 4, 30)
        for tau in (0.0, 0.3, 1.7, 12.0):
            b = shrinkage_factors(s2, tau).b
            lhs = np.sum(tau**2 * b + s2 * b)
            assert lhs == pytest.approx(s2.sum(), rel=1e-13)
