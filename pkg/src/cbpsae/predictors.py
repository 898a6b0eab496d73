"""Fitting routines for the per-area shrinkage predictors.

The zoo: model-based predictors with an estimated variance component
(fit_eblup with reml/mle/ure), the prediction-weighted fit (fit_obp), and the
compromise fits that pick a data-adaptive mixture of the two weight families
by minimizing the unbiased risk estimate (fit_cbp and its plug-in and
two-component variants).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AreaDataset
from .exceptions import InsufficientDataError, OptimizationError
from .model import (
    ShrinkageVector,
    combine,
    shrinkage_factors,
    solve_normal_equations,
    tau_upper_bound,
    wls_beta,
)
from .optimize import (
    BoxSpec,
    _local_minima_indices,
    dedupe_lattice_picks,
    minimize_1d,
    refine_points,
)
from .risk import _mspe_terms, compromise_risk_grid, mspe_grid_wb, mspe_estimate_wb
from .variance import tau_mle, tau_obp, tau_reml, tau_ure
from .weights import (
    WeightVector,
    bpe_weights,
    compromise_weights,
    mle_weights,
    multitau_weights,
    plugin_weights,
)

# Seed-lattice sizes for the compromise searches.
ALPHA_SEEDS = 17
TAU_SEEDS = 33
_TAU_GRID_SPAN = 1e-3


@dataclass(frozen=True)
class FitResult:
    """A fitted predictor: coefficients, hyperparameters, and predictions.

    ``alpha_star`` is None for the non-compromise methods. For the
    two-component compromise, ``tau_star`` is the effective (alpha-mixed)
    value and ``tau_components`` carries the underlying pair.
    """

    method: str
    beta: np.ndarray
    tau_star: float
    theta_hat: np.ndarray
    shrinkage: ShrinkageVector
    weights: WeightVector
    risk_estimate: float
    alpha_star: float | None = None
    tau_components: tuple | None = None
    converged: bool = True


def _require_fit_shape(data: AreaDataset):
    if data.k <= data.p:
        raise InsufficientDataError(
            f"need more areas than design columns (K={data.k}, p={data.p})"
        )
    # Full-column-rank check, independent of any particular weight vector.
    solve_normal_equations(data.x.T @ data.x, np.zeros(data.p))


def _tau_seed_values(tau_max: float, count: int) -> np.ndarray:
    return np.concatenate(
        ([0.0], np.geomspace(_TAU_GRID_SPAN * tau_max, tau_max, count - 1))
    )


def fit_eblup(data: AreaDataset, tau_method: str = "reml") -> FitResult:
    """Precision-weighted shrinkage fit with tau estimated by the named
    criterion ("mle", "reml", or "ure")."""
    _require_fit_shape(data)
    try:
        est = {"mle": tau_mle, "reml": tau_reml, "ure": tau_ure}[tau_method]
    except KeyError:
        raise ValueError(f"unknown tau method {tau_method!r}") from None
    tau_hat = est(data)
    w = mle_weights(data.sigma2, tau_hat.tau)
    beta = wls_beta(data, w)
    theta = combine(data, beta, tau_hat.tau)
    b = shrinkage_factors(data.sigma2, tau_hat.tau)
    risk = mspe_estimate_wb(data, w, b)
    return FitResult(
        method=f"eblup_{tau_method}",
        beta=beta.beta,
        tau_star=tau_hat.tau,
        theta_hat=theta,
        shrinkage=b,
        weights=w,
        risk_estimate=risk.value,
        converged=tau_hat.converged,
    )


def fit_obp(data: AreaDataset) -> FitResult:
    """Prediction-weighted fit: tau from the predictive criterion, regression
    coefficients from squared-shrinkage weights."""
    _require_fit_shape(data)
    tau_hat = tau_obp(data)
    w = bpe_weights(data.sigma2, tau_hat.tau)
    beta = wls_beta(data, w)
    theta = combine(data, beta, tau_hat.tau)
    b = shrinkage_factors(data.sigma2, tau_hat.tau)
    risk = mspe_estimate_wb(data, w, b)
    return FitResult(
        method="obp",
        beta=beta.beta,
        tau_star=tau_hat.tau,
        theta_hat=theta,
        shrinkage=b,
        weights=w,
        risk_estimate=risk.value,
        converged=tau_hat.converged,
    )


def _compromise_scalar_objective(data: AreaDataset):
    y, x, s2 = data.y, data.x, data.sigma2

    def f(point):
        a, t = float(point[0]), float(point[1])
        inv = 1.0 / (s2 + t * t)
        wm = inv
        wb = (s2 * inv) ** 2
        w = a * wm / wm.sum() + (1.0 - a) * wb / wb.sum()
        b = s2 * inv
        quad, cross, noise = _mspe_terms(y, x, s2, w, b, np.linalg.solve)
        return quad + cross + noise

    return f


def fit_cbp(
    data: AreaDataset,
    alpha_seeds: int = ALPHA_SEEDS,
    tau_seeds: int = TAU_SEEDS,
) -> FitResult:
    """Compromise fit: jointly minimize the risk estimate over
    (alpha, tau) in [0, 1] x [0, tau_max].

    Seeds an alpha x tau lattice, refines the top seeds, lattice-local
    minima, and both family endpoints with bounded quasi-Newton steps, and
    breaks exact ties toward larger alpha then smaller tau.
    """
    _require_fit_shape(data)
    tau_max = tau_upper_bound(data.y)
    alphas = np.linspace(0.0, 1.0, alpha_seeds)
    taus = _tau_seed_values(tau_max, tau_seeds)
    vals = compromise_risk_grid(data, alphas, taus)           # (A, T)
    flat = vals.ravel()
    if not np.isfinite(flat).any():
        raise OptimizationError("risk surface is non-finite at every seed")
    flat = np.where(np.isfinite(flat), flat, np.inf)

    picks = [int(np.argmin(flat))]
    picks += list(_local_minima_indices(flat, vals.shape))
    picks = dedupe_lattice_picks(picks, vals.shape)
    # Family-endpoint seeds keep the pure-weight solutions in play.
    picks.append(0 * len(taus) + int(np.argmin(vals[0])))
    picks.append((len(alphas) - 1) * len(taus) + int(np.argmin(vals[-1])))
    picks = list(dict.fromkeys(picks))[:8]
    starts = [
        (alphas[i // len(taus)], taus[i % len(taus)]) for i in picks
    ]

    f = _compromise_scalar_objective(data)
    xbest, fun, _, ok = refine_points(
        f, (0.0, 0.0), (1.0, tau_max), starts, tie_break=("high", "low")
    )
    if not np.isfinite(fun):
        raise OptimizationError(
            "compromise search failed to find a finite optimum", best=(xbest, fun)
        )
    alpha_star, tau_star = float(xbest[0]), float(xbest[1])
    w = compromise_weights(data.sigma2, alpha_star, tau_star)
    beta = wls_beta(data, w)
    theta = combine(data, beta, tau_star)
    b = shrinkage_factors(data.sigma2, tau_star)
    return FitResult(
        method="cbp",
        beta=beta.beta,
        tau_star=tau_star,
        theta_hat=theta,
        shrinkage=b,
        weights=w,
        risk_estimate=float(fun),
        alpha_star=alpha_star,
        converged=ok,
    )


def fit_plugin_cbp(data: AreaDataset, alpha_seeds: int = 33) -> FitResult:
    """Plug-in compromise: tau estimates are computed once (restricted
    likelihood for the precision family, predictive criterion for the
    squared-shrinkage family) and only the mixing weight is optimized.

    Both the regression weights and the shrinkage factors move with alpha, so
    the risk estimate is evaluated with the alpha-mixed shrinkage.
    """
    _require_fit_shape(data)
    t_reml = tau_reml(data).tau
    t_obp = tau_obp(data).tau
    s2 = data.sigma2
    wm = 1.0 / (s2 + t_reml * t_reml)
    wm = wm / wm.sum()
    wb = (s2 / (s2 + t_obp * t_obp)) ** 2
    wb = wb / wb.sum()

    def f_vec(alphas):
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        w = alphas[:, None] * wm[None, :] + (1.0 - alphas)[:, None] * wb[None, :]
        tau2 = alphas * t_reml**2 + (1.0 - alphas) * t_obp**2
        b = s2[None, :] / (s2[None, :] + tau2[:, None])
        out = mspe_grid_wb(data.y, data.x, s2, w, b)
        return out if np.ndim(alphas) else float(out[0])

    box = BoxSpec(lower=(0.0,), upper=(1.0,), grid_seeds=(alpha_seeds,))
    res = minimize_1d(f_vec, box, tie="high")
    alpha_star = float(res.x[0])
    w, b = plugin_weights(s2, alpha_star, t_reml, t_obp)
    beta = wls_beta(data, w)
    theta = b.b * (data.x @ beta.beta) + (1.0 - b.b) * data.y
    tau_eff = float(np.sqrt(alpha_star * t_reml**2 + (1.0 - alpha_star) * t_obp**2))
    return FitResult(
        method="cbp_plugin",
        beta=beta.beta,
        tau_star=tau_eff,
        theta_hat=theta,
        shrinkage=b,
        weights=w,
        risk_estimate=float(res.fun),
        alpha_star=alpha_star,
        tau_components=(t_reml, t_obp),
        converged=res.converged,
    )


def fit_multitau_cbp(
    data: AreaDataset,
    alpha_seeds: int = 9,
    tau_seeds: int = 17,
) -> FitResult:
    """Compromise fit with separate variance components for the two weight
    families: minimize the risk estimate over (alpha, tau0, tau1) in
    [0, 1] x [0, tau_max]^2.

    The single-tau optimum is injected as a refinement start, so the achieved
    risk never exceeds the single-tau fit's.
    """
    _require_fit_shape(data)
    cbp = fit_cbp(data)
    tau_max = tau_upper_bound(data.y)
    s2, y, x = data.sigma2, data.y, data.x
    alphas = np.linspace(0.0, 1.0, alpha_seeds)
    taus = _tau_seed_values(tau_max, tau_seeds)

    inv = 1.0 / (s2[None, :] + (taus * taus)[:, None])        # (T, K)
    wm = inv / inv.sum(axis=1, keepdims=True)                 # family at tau1
    wb_raw = (s2[None, :] * inv) ** 2
    wb = wb_raw / wb_raw.sum(axis=1, keepdims=True)           # family at tau0
    a_n, t_n = alphas.size, taus.size
    w_grid = (
        alphas[:, None, None, None] * wm[None, None, :, :]
        + (1.0 - alphas)[:, None, None, None] * wb[None, :, None, :]
    )                                                         # (A, T0, T1, K)
    tau2_mix = (
        alphas[:, None, None] * (taus * taus)[None, None, :]
        + (1.0 - alphas)[:, None, None] * (taus * taus)[None, :, None]
    )                                                         # (A, T0, T1)
    b_grid = s2[None, None, None, :] / (s2[None, None, None, :] + tau2_mix[..., None])
    flat_w = w_grid.reshape(-1, data.k)
    flat_b = b_grid.reshape(-1, data.k)
    vals = mspe_grid_wb(y, x, s2, flat_w, flat_b)
    vals = np.where(np.isfinite(vals), vals, np.inf)

    picks = [int(np.argmin(vals))]
    picks += list(_local_minima_indices(vals, (a_n, t_n, t_n)))
    picks = dedupe_lattice_picks(picks, (a_n, t_n, t_n))[:6]
    starts = []
    for i in picks:
        ia, rem = divmod(i, t_n * t_n)
        it0, it1 = divmod(rem, t_n)
        starts.append((alphas[ia], taus[it0], taus[it1]))
    starts.append((cbp.alpha_star, cbp.tau_star, cbp.tau_star))

    def f(point):
        a, t0, t1 = (float(v) for v in point)
        inv1 = 1.0 / (s2 + t1 * t1)
        wm1 = inv1 / inv1.sum()
        b0 = (s2 / (s2 + t0 * t0)) ** 2
        wb0 = b0 / b0.sum()
        w = a * wm1 + (1.0 - a) * wb0
        tau2 = a * t1 * t1 + (1.0 - a) * t0 * t0
        b = s2 / (s2 + tau2)
        quad, cross, noise = _mspe_terms(y, x, s2, w, b, np.linalg.solve)
        return quad + cross + noise

    xbest, fun, _, ok = refine_points(
        f, (0.0, 0.0, 0.0), (1.0, tau_max, tau_max), starts,
        tie_break=("high", "low", "low"),
    )
    if not np.isfinite(fun):
        raise OptimizationError(
            "two-component compromise search failed", best=(xbest, fun)
        )
    alpha_star, tau0, tau1 = (float(v) for v in xbest)
    w, b = multitau_weights(s2, alpha_star, tau0, tau1)
    beta = wls_beta(data, w)
    theta = b.b * (x @ beta.beta) + (1.0 - b.b) * y
    tau_eff = float(np.sqrt(alpha_star * tau1**2 + (1.0 - alpha_star) * tau0**2))
    return FitResult(
        method="cbp_multitau",
        beta=beta.beta,
        tau_star=tau_eff,
        theta_hat=theta,
        shrinkage=b,
        weights=w,
        risk_estimate=float(fun),
        alpha_star=alpha_star,
        tau_components=(tau0, tau1),
        converged=ok,
    )
