"""Core linear machinery: shrinkage factors, weighted least squares, and the
linear-predictor matrix every estimator in the package is built from."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpstrf

from .data import AreaDataset, check_tau, check_vector
from .exceptions import SingularDesignError

# Relative pivot threshold for rank decisions in the normal-equations solve.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ShrinkageVector:
    """Per-area shrinkage factors B_k = sigma_k^2 / (sigma_k^2 + tau^2)."""

    b: np.ndarray

    def __post_init__(self):
        b = check_vector(self.b, "b")
        if np.any(b < 0) or np.any(b > 1):
            raise ValueError("shrinkage factors must lie in [0, 1]")
        object.__setattr__(self, "b", b)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.b, dtype=dtype)

    def __len__(self):
        return self.b.shape[0]


@dataclass(frozen=True)
class BetaEstimate:
    """Weighted least-squares coefficients with the weights that produced them."""

    beta: np.ndarray
    weights_used: "object"  # WeightVector; kept untyped to avoid an import cycle
    tau_used: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.beta, dtype=dtype)


@dataclass(frozen=True)
class LinearPredictorMatrix:
    """K x K matrix U with theta_hat = (U + I) Y; satisfies U X = 0."""

    u: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.u, dtype=dtype)


def shrinkage_factors(sigma2, tau) -> ShrinkageVector:
    """Shrinkage factors sigma_k^2 / (sigma_k^2 + tau^2).

    tau = 0 gives B_k = 1 (full weight on the regression prediction); the
    factors decrease strictly in tau^2 for fixed sigma_k^2.
    """
    s2 = check_vector(sigma2, "sigma2", positive=True)
    t = check_tau(tau)
    return ShrinkageVector(s2 / (s2 + t * t))


def tau_upper_bound(y) -> float:
    """Search cap for the variance component: ten sample standard deviations.

    Degenerate inputs (a single area or a constant response) fall back to 1.0
    so downstream box searches keep a nonempty domain.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        return 1.0
    sd = float(np.std(y, ddof=1))
    return 10.0 * sd if sd > 0 else 1.0


def _weight_array(w, k):
    """Accept a WeightVector or a raw array; return a validated (k,) array."""
    arr = np.asarray(getattr(w, "w", w), dtype=float)
    arr = check_vector(arr, "weights", k=k, nonnegative=True)
    total = arr.sum()
    if total <= 0:
        raise ValueError("weights must have positive total mass")
    if abs(total - 1.0) > 1e-12:
        arr = arr / total
    return arr


def solve_normal_equations(a, rhs):
    """Solve the SPD system a @ x = rhs via pivoted Cholesky with rank checks.

    Raises SingularDesignError naming the unpivotable columns when the rank
    falls short, using the relative threshold RANK_RTOL * max pivot.
    """
    a = np.asarray(a, dtype=float)
    p = a.shape[0]
    tol = RANK_RTOL * max(float(np.max(np.diag(a))), 0.0)
    c, piv, rank, info = dpstrf(a, tol=tol, lower=1)
    if info < 0:
        raise ValueError(f"illegal value in normal-equations factorization (arg {-info})")
    if rank < p:
        bad = tuple(int(j) for j in (piv[rank:] - 1))
        raise SingularDesignError(
            f"normal equations are rank deficient (rank {rank} < {p}); "
            f"offending design columns: {sorted(bad)}",
            columns=sorted(bad),
        )
    perm = piv - 1
    low = np.tril(c)
    rhs = np.asarray(rhs, dtype=float)
    b_perm = rhs[perm] if rhs.ndim == 1 else rhs[perm, :]
    z = solve_triangular(low, b_perm, lower=True)
    xp = solve_triangular(low.T, z, lower=False)
    out = np.empty_like(xp)
    if rhs.ndim == 1:
        out[perm] = xp
    else:
        out[perm, :] = xp
    return out


def wls_beta(data: AreaDataset, w) -> BetaEstimate:
    """Weighted least-squares coefficients (X^T W X)^{-1} X^T W Y.

    Weights are renormalized to sum to one; the solution is invariant to that
    scaling. Rank deficiency of X under the weight support raises
    SingularDesignError.
    """
    warr = _weight_array(w, data.k)
    x, y = data.x, data.y
    a = x.T @ (warr[:, None] * x)
    rhs = x.T @ (warr * y)
    beta = solve_normal_equations(a, rhs)
    tau_used = float(getattr(w, "tau", np.nan))
    return BetaEstimate(beta=beta, weights_used=w, tau_used=tau_used)


def predictor_matrix(data: AreaDataset, w, tau) -> LinearPredictorMatrix:
    """The matrix U = B_tau (X (X^T W X)^{-1} X^T W - I).

    theta_hat(w, tau) = (U + I) Y reproduces the shrinkage predictions, and
    U X = 0 exactly in real arithmetic.
    """
    warr = _weight_array(w, data.k)
    t = check_tau(tau)
    x = data.x
    b = data.sigma2 / (data.sigma2 + t * t)
    a = x.T @ (warr[:, None] * x)
    # hat = X (X^T W X)^{-1} X^T W
    hat = x @ solve_normal_equations(a, (warr[:, None] * x).T)
    u = b[:, None] * (hat - np.eye(data.k))
    return LinearPredictorMatrix(u=u)


def combine(data: AreaDataset, beta, tau) -> np.ndarray:
    """Shrinkage predictions B_k x_k' beta + (1 - B_k) Y_k."""
    bvec = np.asarray(getattr(beta, "beta", beta), dtype=float)
    if bvec.shape[0] != data.p:
        raise ValueError(
            f"beta has length {bvec.shape[0]}, design has p={data.p} columns"
        )
    t = check_tau(tau)
    b = data.sigma2 / (data.sigma2 + t * t)
    return b * (data.x @ bvec) + (1.0 - b) * data.y
