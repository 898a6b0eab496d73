"""Estimators for the population mean mu_0 = K^{-1} sum_k theta_k under
Var(Y_k | theta_k) = sigma^2 / n_k.

Includes the direct and minimum-variance estimators, the weighted shrinkage
family with its unbiased risk estimate, the closed-form optimal mixing weight
between two weighting schemes, compromise fits, and a spline-regression
estimator that models the response/sample-size relationship directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PopMeanInput, check_tau
from .model import tau_upper_bound
from .optimize import BoxSpec, minimize_1d
from .spline import SmoothingSpline
from .variance import tau_obp, tau_reml


@dataclass(frozen=True)
class PopMeanResult:
    mu_hat: float
    method: str
    alpha: float | None = None
    tau: float | None = None
    flag: str | None = None


@dataclass(frozen=True)
class AlphaOpt:
    """Closed-form optimal mixing weight with the quadratic coefficients
    that produced it; ``degenerate`` marks a constant-in-alpha objective."""

    alpha: float
    c1: float
    c2: float
    degenerate: bool = False


def _norm_w(w, k):
    arr = np.asarray(getattr(w, "w", w), dtype=float)
    if arr.shape != (k,):
        raise ValueError(f"weights have shape {arr.shape}, expected ({k},)")
    if np.any(arr < 0):
        raise ValueError("weights must be nonnegative")
    total = arr.sum()
    if total <= 0:
        raise ValueError("weights must have positive total mass")
    return arr / total


def _shrink(inp: PopMeanInput, tau: float) -> np.ndarray:
    return inp.sigma2 / (inp.sigma2 + inp.n * tau * tau)


def mu_direct(inp: PopMeanInput) -> PopMeanResult:
    """Unweighted mean of the unit-level direct estimates."""
    return PopMeanResult(mu_hat=float(np.mean(inp.y)), method="direct")


def mu_minvar(inp: PopMeanInput) -> PopMeanResult:
    """Sample-size weighted mean; minimizes conditional variance."""
    mu = float(np.sum(inp.y * inp.n) / (inp.k * inp.n_mean))
    return PopMeanResult(mu_hat=mu, method="minvar")


def mu_family_wb(inp: PopMeanInput, w, b) -> float:
    """Family value for explicit weights and shrinkage factors:
    (sum_k B_k / K) * (weighted mean of Y) + K^{-1} sum_k (1 - B_k) Y_k."""
    warr = _norm_w(w, inp.k)
    b = np.asarray(getattr(b, "b", b), dtype=float)
    bdot = b.sum()
    return float(
        bdot * np.sum(inp.y * warr) / inp.k + np.mean((1.0 - b) * inp.y)
    )


def mu_family(inp: PopMeanInput, w, tau) -> PopMeanResult:
    """Shrinkage family for the population mean at weights ``w`` and ``tau``."""
    t = check_tau(tau)
    mu = mu_family_wb(inp, w, _shrink(inp, t))
    return PopMeanResult(mu_hat=mu, method="family", tau=t)


def popmean_risk_wb(inp: PopMeanInput, w, b) -> float:
    """Unbiased risk estimate of the family value at explicit (w, B)."""
    warr = _norm_w(w, inp.k)
    b = np.asarray(getattr(b, "b", b), dtype=float)
    k = inp.k
    bdot = b.sum()
    first = (np.sum(b * inp.y) / k - bdot * np.sum(warr * inp.y) / k) ** 2
    second = 2.0 * bdot * inp.sigma2 / k**2 * np.sum(warr / inp.n)
    third = -2.0 * inp.sigma2 / k**2 * np.sum(b / inp.n)
    fourth = inp.sigma2 / (k * inp.n_harmonic)
    return float(first + second + third + fourth)


def popmean_risk(inp: PopMeanInput, w, tau) -> float:
    """Unbiased estimate of E{(mu_hat(w, tau) - mu_0)^2}."""
    t = check_tau(tau)
    return popmean_risk_wb(inp, w, _shrink(inp, t))


def alpha_opt_closed_form(inp: PopMeanInput, w0, w1, tau) -> AlphaOpt:
    """Optimal alpha in [0, 1] mixing w1 (coefficient alpha) with w0.

    The risk estimate is an exact quadratic alpha^2 C1 - 2 alpha C2 + C3, so
    the minimizer is 0 when C2 <= 0, 1 when C1 <= C2, and C2/C1 otherwise.
    When both schemes give the same weighted mean of Y the objective is
    constant in alpha; 0 is returned with the degenerate flag set.
    """
    t = check_tau(tau)
    w0 = _norm_w(w0, inp.k)
    w1 = _norm_w(w1, inp.k)
    b = _shrink(inp, t)
    k = inp.k
    bdot = b.sum()
    diff = float(np.sum((w1 - w0) * inp.y))
    c1 = bdot**2 / k**2 * diff**2
    c2 = (
        bdot / k**2 * diff * (np.sum(b * inp.y) - bdot * np.sum(w0 * inp.y))
        - bdot * inp.sigma2 / k**2 * np.sum((w1 - w0) / inp.n)
    )
    if c1 == 0.0:
        return AlphaOpt(alpha=0.0, c1=c1, c2=float(c2), degenerate=True)
    if c2 <= 0.0:
        alpha = 0.0
    elif c1 <= c2:
        alpha = 1.0
    else:
        alpha = float(c2 / c1)
    return AlphaOpt(alpha=alpha, c1=float(c1), c2=float(c2))


def mu_direct_compromise(inp: PopMeanInput) -> PopMeanResult:
    """Mix of the minimum-variance and direct estimators at tau = 0 with the
    closed-form mixing weight

        alpha = clip{ sigma^2 (nbar - nharm) /
                      [K nbar nharm (mu_mv - mu_direct)^2], 0, 1 }.
    """
    mu_mv = mu_minvar(inp).mu_hat
    mu_dir = mu_direct(inp).mu_hat
    gap = mu_mv - mu_dir
    if gap == 0.0:
        return PopMeanResult(
            mu_hat=mu_dir, method="direct_compromise", alpha=0.0, tau=0.0,
            flag="degenerate",
        )
    alpha = inp.sigma2 * (inp.n_mean - inp.n_harmonic) / (
        inp.k * inp.n_mean * inp.n_harmonic * gap**2
    )
    alpha = float(min(max(alpha, 0.0), 1.0))
    mu = alpha * mu_mv + (1.0 - alpha) * mu_dir
    return PopMeanResult(mu_hat=mu, method="direct_compromise", alpha=alpha, tau=0.0)


def mu_spline_regression(inp: PopMeanInput, lam: float | None = None) -> PopMeanResult:
    """Average of spline-regression fitted values of Y on n, weighted by the
    sampling precisions n_k / sigma^2.

    Falls back to a weighted linear fit (flag "fallback_linear") when fewer
    than 4 distinct sample sizes are available.
    """
    w = inp.n / inp.sigma2
    if np.unique(inp.n).size < 4:
        xmat = np.column_stack([np.ones(inp.k), inp.n])
        beta = np.linalg.solve(
            xmat.T @ (w[:, None] * xmat), xmat.T @ (w * inp.y)
        )
        fitted = xmat @ beta
        return PopMeanResult(
            mu_hat=float(np.mean(fitted)), method="spline", flag="fallback_linear"
        )
    sp = SmoothingSpline(lam=lam).fit(inp.n, inp.y, sample_weight=w)
    return PopMeanResult(mu_hat=float(np.mean(sp.fitted_)), method="spline")


def _family_grids(inp: PopMeanInput, taus):
    """Precision and squared-shrinkage weight families over a tau grid."""
    taus = np.asarray(taus, dtype=float)
    s2k = inp.sigma2_vec
    inv = 1.0 / (s2k[None, :] + (taus * taus)[:, None])
    wm = inv / inv.sum(axis=1, keepdims=True)
    raw = (s2k[None, :] * inv) ** 2
    wb = raw / raw.sum(axis=1, keepdims=True)
    b = s2k[None, :] * inv
    return wm, wb, b


def _cbp_tau_objective(inp: PopMeanInput, taus):
    """min_alpha risk at each tau (closed-form alpha), plus the minimizers."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    wm, wb, b = _family_grids(inp, taus)
    k = inp.k
    y, n, s2 = inp.y, inp.n, inp.sigma2
    bdot = b.sum(axis=1)
    diff = (wm - wb) @ y
    c1 = bdot**2 / k**2 * diff**2
    c2 = bdot / k**2 * diff * (b @ y - bdot * (wb @ y)) - (
        bdot * s2 / k**2
    ) * ((wm - wb) / n[None, :]).sum(axis=1)
    first0 = (b @ y / k - bdot * (wb @ y) / k) ** 2
    second0 = 2.0 * bdot * s2 / k**2 * (wb / n[None, :]).sum(axis=1)
    third0 = -2.0 * s2 / k**2 * (b / n[None, :]).sum(axis=1)
    fourth = s2 / k * np.mean(1.0 / n)
    c3 = first0 + second0 + third0 + fourth
    with np.errstate(divide="ignore", invalid="ignore"):
        interior = np.where(c1 > 0, c2 / np.where(c1 > 0, c1, 1.0), 0.0)
    alpha = np.where(c2 <= 0, 0.0, np.where(c1 <= c2, 1.0, interior))
    fval = alpha**2 * c1 - 2.0 * alpha * c2 + c3
    return fval, alpha


def mu_cbp(inp: PopMeanInput) -> PopMeanResult:
    """Compromise fit for the population mean: minimize the risk estimate over
    the (alpha, tau) box, using the closed-form alpha at each tau."""
    tau_max = tau_upper_bound(inp.y)
    seeds = np.concatenate(([0.0], np.geomspace(1e-4 * tau_max, tau_max, 64)))
    box = BoxSpec(
        lower=(0.0,), upper=(tau_max,), grid_seeds=(len(seeds),),
        seed_values=(seeds,),
    )
    res = minimize_1d(lambda t: _cbp_tau_objective(inp, t)[0], box)
    tau_star = float(res.x[0])
    _, alpha_arr = _cbp_tau_objective(inp, np.array([tau_star]))
    alpha_star = float(alpha_arr[0])
    wm, wb, b = _family_grids(inp, np.array([tau_star]))
    w = alpha_star * wm[0] + (1.0 - alpha_star) * wb[0]
    mu = mu_family_wb(inp, w, b[0])
    return PopMeanResult(mu_hat=mu, method="cbp", alpha=alpha_star, tau=tau_star)


def mu_plugin_cbp(inp: PopMeanInput) -> PopMeanResult:
    """Plug-in compromise for the population mean: tau estimates are fixed at
    the restricted-likelihood and predictive-criterion values, then alpha
    alone is tuned against the risk estimate with alpha-mixed shrinkage."""
    data = inp.as_area_dataset()
    t1 = tau_reml(data).tau
    t0 = tau_obp(data).tau
    s2k = inp.sigma2_vec
    wm = 1.0 / (s2k + t1 * t1)
    wm = wm / wm.sum()
    raw = (s2k / (s2k + t0 * t0)) ** 2
    wb = raw / raw.sum()

    def f(alphas):
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        out = np.empty(alphas.shape[0])
        for i, a in enumerate(alphas):
            w = a * wm + (1.0 - a) * wb
            tau2 = a * t1 * t1 + (1.0 - a) * t0 * t0
            b = s2k / (s2k + tau2)
            out[i] = popmean_risk_wb(inp, w, b)
        return out if out.size > 1 else float(out[0])

    box = BoxSpec(lower=(0.0,), upper=(1.0,), grid_seeds=(33,))
    res = minimize_1d(f, box, tie="high")
    alpha = float(res.x[0])
    w = alpha * wm + (1.0 - alpha) * wb
    tau2 = alpha * t1 * t1 + (1.0 - alpha) * t0 * t0
    b = s2k / (s2k + tau2)
    mu = mu_family_wb(inp, w, b)
    return PopMeanResult(
        mu_hat=mu, method="cbp_plugin", alpha=alpha, tau=float(np.sqrt(tau2))
    )


def mu_eblup(inp: PopMeanInput, tau_method: str = "reml") -> PopMeanResult:
    """Population mean from the precision-weighted shrinkage fit."""
    from .variance import tau_mle, tau_ure

    data = inp.as_area_dataset()
    est = {"reml": tau_reml, "mle": tau_mle, "ure": tau_ure}[tau_method](data)
    s2k = inp.sigma2_vec
    w = 1.0 / (s2k + est.tau**2)
    mu = mu_family_wb(inp, w, s2k / (s2k + est.tau**2))
    return PopMeanResult(mu_hat=mu, method=f"eblup_{tau_method}", tau=est.tau)


def mu_obp(inp: PopMeanInput) -> PopMeanResult:
    """Population mean from the prediction-weighted shrinkage fit."""
    data = inp.as_area_dataset()
    est = tau_obp(data)
    s2k = inp.sigma2_vec
    b = s2k / (s2k + est.tau**2)
    mu = mu_family_wb(inp, b * b, b)
    return PopMeanResult(mu_hat=mu, method="obp", tau=est.tau)
