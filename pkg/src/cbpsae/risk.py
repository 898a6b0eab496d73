"""Unbiased risk (MSPE) estimators and exact MSPE evaluators.

The headline quantity is the data-computable estimate

    M(w, tau) = Y'U'UY + 2 tr(U V) + tr(V),      V = diag(sigma_k^2),

which is unbiased for the true MSPE of the shrinkage predictor at fixed
weights. It can be negative; values are reported as-is because optimizers
only need relative comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import AreaDataset, check_alpha, check_tau, check_vector
from .general import general_mspe_estimate  # noqa: F401  (part of this module's surface)
from .model import _weight_array, solve_normal_equations
from .weights import compromise_weight_grid, compromise_weights, shrinkage_grid


@dataclass(frozen=True)
class RiskValue:
    """A risk-estimate value with its additive breakdown.

    ``value`` may legitimately be negative (it is an unbiased estimate of a
    nonnegative quantity); ``components`` always sums to ``value``.
    """

    value: float
    components: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


def _mspe_terms(y, x, sigma2, w, b, solver):
    """Shared evaluation of the risk estimate without forming U.

    Uses Y'U'UY = sum_k b_k^2 (y_k - x_k'beta)^2 and
    tr(U V) = tr{(X'WX)^{-1} X' diag(w sigma2 b) X} - sum_k b_k sigma_k^2.
    """
    a = x.T @ (w[:, None] * x)
    beta = solver(a, x.T @ (w * y))
    resid = y - x @ beta
    quad = float(np.sum(b * b * resid * resid))
    c = x.T @ ((w * sigma2 * b)[:, None] * x)
    tr_hat = float(np.trace(solver(a, c)))
    cross = 2.0 * (tr_hat - float(np.sum(b * sigma2)))
    noise = float(np.sum(sigma2))
    return quad, cross, noise


def mspe_estimate_wb(data: AreaDataset, w, b) -> RiskValue:
    """Risk estimate for explicit regression weights and shrinkage factors."""
    warr = _weight_array(w, data.k)
    barr = np.asarray(getattr(b, "b", b), dtype=float)
    quad, cross, noise = _mspe_terms(
        data.y, data.x, data.sigma2, warr, barr, solve_normal_equations
    )
    return RiskValue(
        value=quad + cross + noise,
        components={"quadratic": quad, "trace_cross": cross, "trace_noise": noise},
    )


def mspe_estimate(data: AreaDataset, w, tau) -> RiskValue:
    """Unbiased MSPE estimate at fixed regression weights and tau."""
    t = check_tau(tau)
    b = data.sigma2 / (data.sigma2 + t * t)
    return mspe_estimate_wb(data, w, b)


def compromise_risk(data: AreaDataset, alpha, tau) -> RiskValue:
    """Risk estimate along the compromise-weight family: the composition of
    compromise_weights and mspe_estimate."""
    a = check_alpha(alpha)
    t = check_tau(tau)
    return mspe_estimate(data, compromise_weights(data.sigma2, a, t), t)


def mspe_true(x, sigma2, mu, tau0, w, tau) -> RiskValue:
    """Exact MSPE of the shrinkage predictor, for simulation use.

    Requires the true mean vector ``mu`` and true random-effect standard
    deviation ``tau0``. Value = |U mu|^2 + tr{(U+I) V (U+I)'} + tau0^2 |U|_F^2.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    k = x.shape[0]
    s2 = check_vector(sigma2, "sigma2", k=k, positive=True)
    mu = check_vector(mu, "mu", k=k)
    t = check_tau(tau)
    t0 = check_tau(tau0)
    warr = _weight_array(w, k)
    b = s2 / (s2 + t * t)
    a = x.T @ (warr[:, None] * x)
    hat = x @ solve_normal_equations(a, (warr[:, None] * x).T)
    u = b[:, None] * (hat - np.eye(k))
    umu = u @ mu
    bias = float(umu @ umu)
    upi = u + np.eye(k)
    noise = float(np.sum((upi * upi) * s2[None, :]))
    re_var = float(t0 * t0 * np.sum(u * u))
    return RiskValue(
        value=bias + noise + re_var,
        components={"bias": bias, "noise_variance": noise, "effect_variance": re_var},
    )


def mspe_grid_wb(y, x, sigma2, w_grid, b_grid) -> np.ndarray:
    """Vectorized risk estimate for G (weights, shrinkage) pairs.

    ``w_grid`` and ``b_grid`` are (G, K) arrays; returns a (G,) array. Rows of
    ``w_grid`` need not be normalized (the estimate is scale-invariant in w).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    w_grid = np.asarray(w_grid, dtype=float)
    b_grid = np.asarray(b_grid, dtype=float)
    a = (w_grid[:, :, None] * x[None, :, :]).transpose(0, 2, 1) @ x
    rhs = (w_grid * y[None, :]) @ x
    beta = np.linalg.solve(a, rhs[..., None])[..., 0]
    resid = y[None, :] - beta @ x.T
    br = b_grid * resid
    quad = np.einsum("gk,gk->g", br, br)
    wsb = w_grid * (sigma2[None, :] * b_grid)
    c = (wsb[:, :, None] * x[None, :, :]).transpose(0, 2, 1) @ x
    tr_hat = np.einsum("gpp->g", np.linalg.solve(a, c))
    cross = 2.0 * (tr_hat - b_grid @ sigma2)
    return quad + cross + sigma2.sum()


def compromise_risk_grid(data: AreaDataset, alphas, taus) -> np.ndarray:
    """Risk-estimate surface on an (alpha, tau) lattice; returns (A, T)."""
    alphas = np.asarray(alphas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    w = compromise_weight_grid(data.sigma2, alphas, taus)      # (A, T, K)
    b = shrinkage_grid(data.sigma2, taus)                      # (T, K)
    a_n, t_n = alphas.size, taus.size
    w_flat = w.reshape(a_n * t_n, data.k)
    b_flat = np.broadcast_to(b[None, :, :], (a_n, t_n, data.k)).reshape(
        a_n * t_n, data.k
    )
    vals = mspe_grid_wb(data.y, data.x, data.sigma2, w_flat, b_flat)
    return vals.reshape(a_n, t_n)
