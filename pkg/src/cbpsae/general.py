"""General linear mixed model with arbitrary random-effect structure and
mixed-effect targets eta = A' mu + R' v."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import check_matrix, check_vector
from .exceptions import SingularDesignError
from .model import solve_normal_equations
from .optimize import BoxSpec, minimize_box

_RIDGE_SCALE = 1e-10


@dataclass(frozen=True)
class GeneralModel:
    """Y = mu + Z v + e with Var(v) = G(lambda), Var(e) = Sigma (known).

    ``g_of_lambda`` maps a parameter vector to the PSD covariance of v;
    ``lambda_domain`` is a sequence of (lower, upper) bounds, one per
    parameter. ``a_mat`` (K x p_eta) and ``r_mat`` (q x p_eta) define the
    prediction targets eta = a_mat' mu + r_mat' v.
    """

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    sigma_mat: np.ndarray
    g_of_lambda: object
    lambda_domain: tuple
    a_mat: np.ndarray
    r_mat: np.ndarray

    def __post_init__(self):
        y = check_vector(self.y, "y")
        k = y.shape[0]
        x = check_matrix(self.x, "x", rows=k)
        z = check_matrix(self.z, "z", rows=k)
        sig = check_matrix(self.sigma_mat, "sigma_mat", rows=k)
        if sig.shape != (k, k):
            raise ValueError(f"sigma_mat must be {k}x{k}, got {sig.shape}")
        if not np.allclose(sig, sig.T, atol=1e-10):
            raise ValueError("sigma_mat must be symmetric")
        a = check_matrix(self.a_mat, "a_mat", rows=k)
        r = check_matrix(self.r_mat, "r_mat", rows=z.shape[1])
        if a.shape[1] != r.shape[1]:
            raise ValueError("a_mat and r_mat must agree on the target count")
        dom = tuple((float(lo), float(hi)) for lo, hi in self.lambda_domain)
        for lo, hi in dom:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"invalid lambda bounds ({lo}, {hi})")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "sigma_mat", sig)
        object.__setattr__(self, "a_mat", a)
        object.__setattr__(self, "r_mat", r)
        object.__setattr__(self, "lambda_domain", dom)

    @property
    def k(self) -> int:
        return self.y.shape[0]

    def g_mat(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        g = np.asarray(self.g_of_lambda(lam), dtype=float)
        q = self.z.shape[1]
        if g.shape != (q, q):
            raise ValueError(f"g_of_lambda must return a {q}x{q} matrix, got {g.shape}")
        return g


@dataclass(frozen=True)
class GeneralFit:
    beta: np.ndarray
    alpha_star: float
    lambda_star: np.ndarray
    eta_hat: np.ndarray
    risk_estimate: float
    weight_matrix: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


def _check_pd(mat, name):
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} is not positive definite") from exc


def marginal_covariance(model: GeneralModel, lam) -> np.ndarray:
    """V(lambda) = Z G(lambda) Z' + Sigma."""
    g = model.g_mat(lam)
    return model.z @ g @ model.z.T + model.sigma_mat


def l_matrix(model: GeneralModel, w_mat, lam):
    """Linear-predictor matrix L with eta_hat = (L + A') Y.

    L = R' G Z' V^{-1} P_W - A' P_W where P_W = I - X (X'WX)^{-1} X'W.
    Returns (L, V) with V the marginal covariance at ``lam``; L X = 0 exactly.
    """
    w_mat = np.asarray(w_mat, dtype=float)
    _check_pd(w_mat, "weight matrix")
    g = model.g_mat(lam)
    v = model.z @ g @ model.z.T + model.sigma_mat
    _check_pd(v, "marginal covariance V(lambda)")
    x = model.x
    xtw = x.T @ w_mat
    hat = x @ solve_normal_equations(xtw @ x, xtw)
    p_w = np.eye(model.k) - hat
    zg = model.z @ g                              # K x q
    core = model.r_mat.T @ zg.T @ np.linalg.solve(v, p_w)
    lmat = core - model.a_mat.T @ p_w
    return lmat, v


def general_mspe_estimate(model: GeneralModel, w_mat, lam):
    """Unbiased risk estimate for eta_hat = (L + A') Y at fixed (W, lambda).

    Value = Y'L'LY + 2 tr{L (V A - Z G R)} + tr{A'VA} - 2 tr{R'GZ'A} + tr{R'GR}.
    Returned as a RiskValue with the additive pieces in ``components``.
    """
    from .risk import RiskValue

    lmat, v = l_matrix(model, w_mat, lam)
    g = model.g_mat(lam)
    a, r, z, y = model.a_mat, model.r_mat, model.z, model.y
    ly = lmat @ y
    quad = float(ly @ ly)
    zg_r = z @ (g @ r)
    cross = 2.0 * float(np.trace(lmat @ (v @ a - zg_r)))
    target_var = (
        float(np.trace(a.T @ v @ a))
        - 2.0 * float(np.trace(zg_r.T @ a))
        + float(np.trace(r.T @ g @ r))
    )
    value = quad + cross + target_var
    return RiskValue(
        value=value,
        components={
            "quadratic": quad,
            "trace_cross": cross,
            "target_variance": target_var,
        },
    )


def compromise_weight_matrix(model: GeneralModel, alpha, lam):
    """W(alpha, lambda) = alpha V^{-1} + (1 - alpha) M'M with
    M = A' - R'GZ'V^{-1}.

    The rank of M'M is at most the target count, so near alpha = 0 the matrix
    can be singular; a ridge of 1e-10 tr(W)/K is added when a Cholesky
    factorization fails. Returns (W, ridged_flag).
    """
    alpha = float(alpha)
    g = model.g_mat(lam)
    v = model.z @ g @ model.z.T + model.sigma_mat
    v_inv = np.linalg.inv(v)
    m = model.a_mat.T - model.r_mat.T @ g @ model.z.T @ v_inv
    w = alpha * v_inv + (1.0 - alpha) * (m.T @ m)
    w = 0.5 * (w + w.T)
    ridged = False
    try:
        np.linalg.cholesky(w)
    except np.linalg.LinAlgError:
        w = w + (_RIDGE_SCALE * np.trace(w) / model.k) * np.eye(model.k)
        ridged = True
    return w, ridged


def general_cure_fit(
    model: GeneralModel,
    alpha_seeds: int = 9,
    lambda_seeds: int = 9,
) -> GeneralFit:
    """Minimize the unbiased risk estimate over (alpha, lambda) in
    [0, 1] x Lambda and return the compromise fit at the optimum."""
    dom = model.lambda_domain
    ridge_seen = {"flag": False}

    def objective(params):
        params = np.atleast_2d(np.asarray(params, dtype=float))
        out = np.empty(params.shape[0])
        for i, row in enumerate(params):
            w, ridged = compromise_weight_matrix(model, row[0], row[1:])
            ridge_seen["flag"] |= ridged
            try:
                out[i] = general_mspe_estimate(model, w, row[1:]).value
            except (np.linalg.LinAlgError, SingularDesignError, ValueError):
                out[i] = np.inf
        return out if out.size > 1 else float(out[0])

    box = BoxSpec(
        lower=(0.0,) + tuple(lo for lo, _ in dom),
        upper=(1.0,) + tuple(hi for _, hi in dom),
        grid_seeds=(alpha_seeds,) + (lambda_seeds,) * len(dom),
    )
    res = minimize_box(objective, box, tie_break=("high",) + ("low",) * len(dom))
    alpha_star = float(res.x[0])
    lam_star = np.asarray(res.x[1:], dtype=float)
    w_star, ridged = compromise_weight_matrix(model, alpha_star, lam_star)
    ridge_seen["flag"] |= ridged
    lmat, _ = l_matrix(model, w_star, lam_star)
    xtw = model.x.T @ w_star
    beta = solve_normal_equations(xtw @ model.x, xtw @ model.y)
    eta_hat = (lmat + model.a_mat.T) @ model.y
    return GeneralFit(
        beta=beta,
        alpha_star=alpha_star,
        lambda_star=lam_star,
        eta_hat=eta_hat,
        risk_estimate=float(res.fun),
        weight_matrix=w_star,
        diagnostics={"ridged": ridge_seen["flag"], "n_eval": res.n_eval},
    )


def fay_herriot_model(data, lambda_max) -> GeneralModel:
    """Wrap an AreaDataset as a GeneralModel: Z = I, G = tau^2 I,
    Sigma = diag(sigma_k^2), targets A = R = I (the per-area mixed effects)."""
    k = data.k
    eye = np.eye(k)
    return GeneralModel(
        y=data.y,
        x=data.x,
        z=eye,
        sigma_mat=np.diag(data.sigma2),
        g_of_lambda=lambda lam: (lam[0] ** 2) * eye,
        lambda_domain=((0.0, float(lambda_max)),),
        a_mat=eye,
        r_mat=eye,
    )
