"""Regression-weight families: MLE, BPE, and their convex compromises."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import check_alpha, check_tau, check_vector
from .model import ShrinkageVector, shrinkage_factors


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative per-area regression weights, normalized to sum to one.

    ``kind`` tags the generating family ("mle", "bpe", "compromise", "plugin",
    "multitau", or "custom"); ``params`` records the family parameters.
    """

    w: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        w = check_vector(self.w, "w", nonnegative=True)
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        object.__setattr__(self, "w", w / total)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.w, dtype=dtype)

    def __len__(self):
        return self.w.shape[0]

    @property
    def tau(self) -> float:
        return float(self.params.get("tau", np.nan))


def _mle_raw(sigma2, tau):
    return 1.0 / (sigma2 + tau * tau)


def _bpe_raw(sigma2, tau):
    b = sigma2 / (sigma2 + tau * tau)
    return b * b


def mle_weights(sigma2, tau) -> WeightVector:
    """Precision weights w_k proportional to 1 / (sigma_k^2 + tau^2)."""
    s2 = check_vector(sigma2, "sigma2", positive=True)
    t = check_tau(tau)
    return WeightVector(_mle_raw(s2, t), kind="mle", params={"tau": t})


def bpe_weights(sigma2, tau) -> WeightVector:
    """Prediction-targeted weights w_k proportional to B_{k,tau}^2.

    These up-weight the high-variance areas; at tau = 0 they are uniform.
    """
    s2 = check_vector(sigma2, "sigma2", positive=True)
    t = check_tau(tau)
    return WeightVector(_bpe_raw(s2, t), kind="bpe", params={"tau": t})


def compromise_weights(sigma2, alpha, tau) -> WeightVector:
    """Convex combination alpha * mle + (1 - alpha) * bpe of the two
    normalized families; each endpoint reproduces the pure family exactly."""
    s2 = check_vector(sigma2, "sigma2", positive=True)
    a = check_alpha(alpha)
    t = check_tau(tau)
    wm = _mle_raw(s2, t)
    wb = _bpe_raw(s2, t)
    w = a * wm / wm.sum() + (1.0 - a) * wb / wb.sum()
    return WeightVector(w, kind="compromise", params={"alpha": a, "tau": t})


def plugin_weights(sigma2, alpha, tau_reml, tau_obp):
    """Plug-in compromise: mixes mle(tau_reml) with bpe(tau_obp) and pairs the
    result with shrinkage factors built from the alpha-mixed squared taus.

    Returns (WeightVector, ShrinkageVector).
    """
    s2 = check_vector(sigma2, "sigma2", positive=True)
    a = check_alpha(alpha)
    t1 = check_tau(tau_reml)
    t0 = check_tau(tau_obp)
    wm = _mle_raw(s2, t1)
    wb = _bpe_raw(s2, t0)
    w = a * wm / wm.sum() + (1.0 - a) * wb / wb.sum()
    tau2_mix = a * t1 * t1 + (1.0 - a) * t0 * t0
    shrink = ShrinkageVector(s2 / (s2 + tau2_mix))
    wv = WeightVector(
        w, kind="plugin", params={"alpha": a, "tau_reml": t1, "tau_obp": t0}
    )
    return wv, shrink


def multitau_weights(sigma2, alpha, tau0, tau1):
    """Compromise with separate variance components per family: mixes
    mle(tau1) with bpe(tau0), shrinkage from alpha*tau1^2 + (1-alpha)*tau0^2.

    Returns (WeightVector, ShrinkageVector); tau0 = tau1 collapses to
    compromise_weights with shrinkage_factors at that tau.
    """
    s2 = check_vector(sigma2, "sigma2", positive=True)
    a = check_alpha(alpha)
    t0 = check_tau(tau0)
    t1 = check_tau(tau1)
    wm = _mle_raw(s2, t1)
    wb = _bpe_raw(s2, t0)
    w = a * wm / wm.sum() + (1.0 - a) * wb / wb.sum()
    tau2_mix = a * t1 * t1 + (1.0 - a) * t0 * t0
    shrink = ShrinkageVector(s2 / (s2 + tau2_mix))
    wv = WeightVector(
        w, kind="multitau", params={"alpha": a, "tau0": t0, "tau1": t1}
    )
    return wv, shrink


def uniform_weights(k: int) -> WeightVector:
    return WeightVector(np.full(k, 1.0 / k), kind="custom")


def compromise_weight_grid(sigma2, alphas, taus) -> np.ndarray:
    """Compromise weights on an (alpha, tau) lattice.

    Returns an (A, T, K) array; vectorized building block for grid seeding.
    """
    s2 = np.asarray(sigma2, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    inv = 1.0 / (s2[None, :] + (taus * taus)[:, None])      # (T, K)
    wm = inv / inv.sum(axis=1, keepdims=True)
    b2 = (s2[None, :] * inv) ** 2
    wb = b2 / b2.sum(axis=1, keepdims=True)
    return (
        alphas[:, None, None] * wm[None, :, :]
        + (1.0 - alphas)[:, None, None] * wb[None, :, :]
    )


def shrinkage_grid(sigma2, taus) -> np.ndarray:
    """Shrinkage factors for each tau in ``taus``; returns a (T, K) array."""
    s2 = np.asarray(sigma2, dtype=float)
    taus = np.asarray(taus, dtype=float)
    return s2[None, :] / (s2[None, :] + (taus * taus)[:, None])
