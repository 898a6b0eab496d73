"""Variance-component estimation for the area-level model: restricted and
profile likelihood, unbiased-risk, and predictive (OBP-style) criteria.

All estimators search tau over [0, tau_max] with tau_max ten sample standard
deviations of Y, seeding a 64-point log-spaced grid (plus the tau = 0
boundary) before local refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AreaDataset
from .exceptions import InsufficientDataError
from .model import tau_upper_bound
from .optimize import BoxSpec, minimize_1d

_GRID_POINTS = 64
_GRID_SPAN = 1e-4  # smallest positive seed relative to tau_max
_XATOL = 1e-8


@dataclass(frozen=True)
class TauEstimate:
    """A variance-component estimate with the criterion value it achieved.

    ``objective_at_opt`` is reported on the natural scale of the method:
    the restricted/profile log-likelihood for reml/mle (maximized), the risk
    estimate for ure, and the predictive criterion for obp (both minimized).
    """

    tau: float
    method: str
    objective_at_opt: float
    converged: bool


def _tau_box(tau_max: float) -> BoxSpec:
    seeds = np.concatenate(
        ([0.0], np.geomspace(_GRID_SPAN * tau_max, tau_max, _GRID_POINTS))
    )
    return BoxSpec(
        lower=(0.0,), upper=(tau_max,), grid_seeds=(len(seeds),), seed_values=(seeds,)
    )


def _profile_pieces(data: AreaDataset, taus):
    """Marginal-variance pieces shared by the likelihood criteria.

    Returns (logdet_v, logdet_xvx, quad) per tau, each a (T,) array, where
    quad = Y'PY with P the projection residual of GLS at that tau.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    y, x, s2 = data.y, data.x, data.sigma2
    inv_v = 1.0 / (s2[None, :] + (taus * taus)[:, None])     # (T, K)
    logdet_v = -np.log(inv_v).sum(axis=1)
    a = (inv_v[:, :, None] * x[None, :, :]).transpose(0, 2, 1) @ x  # X'V^-1X
    rhs = (inv_v * y[None, :]) @ x
    sign, logdet_xvx = np.linalg.slogdet(a)
    if np.any(sign <= 0):
        raise InsufficientDataError("X'V^{-1}X is not positive definite")
    beta = np.linalg.solve(a, rhs[..., None])[..., 0]
    quad = inv_v @ (y * y) - np.einsum("tp,tp->t", rhs, beta)
    return logdet_v, logdet_xvx, quad


def reml_loglik(data: AreaDataset, taus):
    """Restricted log-likelihood (up to constants), vectorized over tau."""
    logdet_v, logdet_xvx, quad = _profile_pieces(data, taus)
    out = -0.5 * (logdet_v + logdet_xvx + quad)
    return out if np.ndim(taus) else float(out[0])


def profile_loglik(data: AreaDataset, taus):
    """Profile marginal log-likelihood with beta concentrated out."""
    logdet_v, _, quad = _profile_pieces(data, taus)
    out = -0.5 * (logdet_v + quad)
    return out if np.ndim(taus) else float(out[0])


def ure_objective(data: AreaDataset, taus):
    """Risk estimate along the precision-weight family, vectorized over tau."""
    from .risk import mspe_grid_wb

    scalar = np.ndim(taus) == 0
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    s2 = data.sigma2
    inv_v = 1.0 / (s2[None, :] + (taus * taus)[:, None])
    b = s2[None, :] * inv_v
    out = mspe_grid_wb(data.y, data.x, s2, inv_v, b)
    return float(out[0]) if scalar else out


def obp_objective(data: AreaDataset, taus):
    """Predictive criterion Y'(B^2 - B^2 X (X'B^2X)^{-1} X'B^2) Y + 2 tau^2 tr(B).

    Up to an additive constant this is an unbiased estimate of the MSPE of
    the shrinkage predictor at the prediction-targeted coefficients, so it is
    minimized over tau.
    """
    scalar = np.ndim(taus) == 0
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    y, x, s2 = data.y, data.x, data.sigma2
    b = s2[None, :] / (s2[None, :] + (taus * taus)[:, None])  # (T, K)
    b2 = b * b
    a = (b2[:, :, None] * x[None, :, :]).transpose(0, 2, 1) @ x
    rhs = (b2 * y[None, :]) @ x
    beta = np.linalg.solve(a, rhs[..., None])[..., 0]
    quad = b2 @ (y * y) - np.einsum("tp,tp->t", rhs, beta)
    out = quad + 2.0 * (taus * taus) * b.sum(axis=1)
    return float(out[0]) if scalar else out


def _search(data, objective_vec, method, sign=1.0, require_kgtp=True):
    if require_kgtp and data.k <= data.p:
        raise InsufficientDataError(
            f"need more areas than design columns (K={data.k}, p={data.p})"
        )
    if data.k < data.p:
        raise InsufficientDataError(
            f"need at least as many areas as design columns (K={data.k}, p={data.p})"
        )
    tau_max = tau_upper_bound(data.y)

    def f(taus):
        return sign * objective_vec(data, taus)

    res = minimize_1d(f, _tau_box(tau_max), xatol=_XATOL)
    return TauEstimate(
        tau=float(res.x[0]),
        method=method,
        objective_at_opt=sign * float(res.fun),
        converged=res.converged,
    )


def tau_reml(data: AreaDataset) -> TauEstimate:
    """Maximize the restricted log-likelihood over [0, tau_max]."""
    return _search(data, reml_loglik, "reml", sign=-1.0)


def tau_mle(data: AreaDataset) -> TauEstimate:
    """Maximize the profile marginal log-likelihood over [0, tau_max]."""
    return _search(data, profile_loglik, "mle", sign=-1.0)


def tau_ure(data: AreaDataset) -> TauEstimate:
    """Minimize the unbiased risk estimate with precision weights tied to tau.

    Defined for K >= p; with K = p the fit interpolates, the criterion is
    constant in tau, and the boundary tau = 0 is returned by the tie rule.
    """
    return _search(data, ure_objective, "ure", require_kgtp=False)


def tau_obp(data: AreaDataset) -> TauEstimate:
    """Minimize the predictive criterion over [0, tau_max]."""
    return _search(data, obp_objective, "obp")
