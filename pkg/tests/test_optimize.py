"""Grid-seeded bounded minimization."""

import numpy as np
import pytest

from cbpsae import AreaDataset, BoxSpec, NonFiniteObjectiveError, minimize_1d, minimize_box
from cbpsae.risk import compromise_risk_grid


class TestMinimize1d:
    def test_quadratic(self):
        box = BoxSpec(lower=(0.0,), upper=(1.0,), grid_seeds=(11,))
        res = minimize_1d(lambda x: (x - 0.3) ** 2, box)
        assert res.x[0] == pytest.approx(0.3, abs=1e-8)
        assert res.converged

    def test_constant_returns_lower_bound(self):
        box = BoxSpec(lower=(-2.0,), upper=(5.0,), grid_seeds=(9,))
        res = minimize_1d(lambda x: 7.0 + 0.0 * np.asarray(x), box)
        assert res.x[0] == -2.0

    def test_constant_high_tie_returns_upper_bound(self):
        box = BoxSpec(lower=(-2.0,), upper=(5.0,), grid_seeds=(9,))
        res = minimize_1d(lambda x: 7.0 + 0.0 * np.asarray(x), box, tie="high")
        assert res.x[0] == 5.0

    def test_matches_dense_scan_on_risk_profile(self):
        # Mixing-weight profile of the risk estimate on a frozen dataset.
        rng = np.random.default_rng(21)
        k = 15
        d = AreaDataset(
            y=rng.normal(0, 1.4, k), x=np.ones((k, 1)), sigma2=rng.uniform(0.2, 2, k)
        )
        tau = 0.9

        def f(alpha):
            alphas = np.atleast_1d(np.asarray(alpha, dtype=float))
            out = compromise_risk_grid(d, alphas, np.array([tau]))[:, 0]
            return out if np.ndim(alpha) else float(out[0])

        box = BoxSpec(lower=(0.0,), upper=(1.0,), grid_seeds=(17,))
        res = minimize_1d(f, box)
        dense = np.linspace(0, 1, 1_000_001)
        vals = f(dense)
        assert res.fun <= vals.min() + 1e-12
        assert abs(res.x[0] - dense[np.argmin(vals)]) <= 2e-6

    def test_nonfinite_objective_raises_with_location(self):
        box = BoxSpec(lower=(0.0,), upper=(1.0,), grid_seeds=(5,))
        with pytest.raises(NonFiniteObjectiveError) as err:
            minimize_1d(lambda x: np.where(np.asarray(x) > 0.6, np.nan, 1.0), box)
        assert err.value.x is not None

    def test_seed_values_override(self):
        seeds = np.array([0.0, 1e-3, 1e-2, 1e-1, 1.0])
        box = BoxSpec(
            lower=(0.0,), upper=(1.0,), grid_seeds=(5,), seed_values=(seeds,)
        )
        res = minimize_1d(lambda x: (np.asarray(x) - 1e-2) ** 2, box)
        assert res.x[0] == pytest.approx(1e-2, abs=1e-8)


class TestMinimizeBox:
    def test_rosenbrock(self):
        def f(p):
            p = np.atleast_2d(p)
            out = (1 - p[:, 0]) ** 2 + 100 * (p[:, 1] - p[:, 0] ** 2) ** 2
            return out if out.size > 1 else float(out[0])

        box = BoxSpec(lower=(0.0, 0.0), upper=(2.0, 2.0), grid_seeds=(9, 9))
        res = minimize_box(f, box)
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-5)

    def test_projection_to_boundary(self):
        # Quadratic with its minimum outside the box lands on the boundary.
        def f(p):
            p = np.atleast_2d(p)
            out = (p[:, 0] - 3.0) ** 2 + (p[:, 1] + 1.0) ** 2
            return out if out.size > 1 else float(out[0])

        box = BoxSpec(lower=(0.0, 0.0), upper=(1.0, 1.0), grid_seeds=(5, 5))
        res = minimize_box(f, box)
        np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-9)

    def test_beats_every_seed(self):
        rng = np.random.default_rng(22)
        coef = rng.normal(size=(4, 4))

        def f(p):
            p = np.atleast_2d(p)
            z = np.stack([p[:, 0], p[:, 1], np.sin(3 * p[:, 0]), np.cos(2 * p[:, 1])], 1)
            out = (z @ coef * z).sum(axis=1)
            return out if out.size > 1 else float(out[0])

        box = BoxSpec(lower=(-1.0, -1.0), upper=(1.0, 1.0), grid_seeds=(7, 7))
        res = minimize_box(f, box)
        seeds = np.stack(
            np.meshgrid(np.linspace(-1, 1, 7), np.linspace(-1, 1, 7), indexing="ij"),
            axis=-1,
        ).reshape(-1, 2)
        assert res.fun <= min(f(s) for s in seeds) + 1e-12

    def test_deterministic(self):
        def f(p):
            p = np.atleast_2d(p)
            out = np.sin(5 * p[:, 0]) + (p[:, 1] - 0.4) ** 2
            return out if out.size > 1 else float(out[0])

        box = BoxSpec(lower=(0.0, 0.0), upper=(1.0, 1.0), grid_seeds=(6, 6))
        a = minimize_box(f, box)
        b = minimize_box(f, box)
        assert a.fun == b.fun
        np.testing.assert_array_equal(a.x, b.x)

    def test_all_seeds_nonfinite_raises(self):
        box = BoxSpec(lower=(0.0,), upper=(1.0,), grid_seeds=(4,))
        with pytest.raises(NonFiniteObjectiveError):
            minimize_box(lambda p: float("nan"), box)

    def test_matches_dense_grid_on_risk_surface(self):
        rng = np.random.default_rng(23)
        k = 12
        d = AreaDataset(
            y=rng.normal(0, 1.2, k), x=np.ones((k, 1)), sigma2=rng.uniform(0.3, 2, k)
        )
        from cbpsae import tau_upper_bound

        tau_max = tau_upper_bound(d.y)

        def f(p):
            p = np.atleast_2d(p)
            out = np.array(
                [compromise_risk_grid(d, [a], [t])[0, 0] for a, t in p]
            )
            return out if out.size > 1 else float(out[0])

        box = BoxSpec(lower=(0.0, 0.0), upper=(1.0, tau_max), grid_seeds=(9, 17))
        res = minimize_box(f, box)
        dense = compromise_risk_grid(
            d, np.linspace(0, 1, 201), np.linspace(0, tau_max, 201)
        )
        assert res.fun <= dense.min() + 1e-6 * (1 + abs(dense.min()))


class TestBoxSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            BoxSpec(lower=(1.0,), upper=(0.0,), grid_seeds=(3,))
        with pytest.raises(ValueError):
            BoxSpec(lower=(0.0,), upper=(1.0,), grid_seeds=(1,))
        with pytest.raises(ValueError):
            BoxSpec(lower=(0.0, 0.0), upper=(1.0,), grid_seeds=(3, 3))
