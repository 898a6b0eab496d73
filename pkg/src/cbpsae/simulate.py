"""Deterministic Monte Carlo engine for the package's benchmark studies.

Three data-generating designs are provided: latent two-cluster means with
cluster-linked precision, a mean linearly tied to unit sample size through a
correlation parameter, and a population-average design with sample sizes
equally spaced on the log scale. Replicates are seeded by (master_seed,
replicate index), so results are bit-identical regardless of thread count and
all methods see the same data within a replicate.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .data import AreaDataset, PopMeanInput
from .exceptions import InfeasibleScenarioError
from .model import tau_upper_bound, solve_normal_equations
from .optimize import _local_minima_indices, dedupe_lattice_picks, refine_points
from .popmean import (
    mu_cbp,
    mu_direct,
    mu_direct_compromise,
    mu_eblup,
    mu_minvar,
    mu_obp,
    mu_plugin_cbp,
    mu_spline_regression,
)
from .predictors import (
    fit_cbp,
    fit_eblup,
    fit_multitau_cbp,
    fit_obp,
    fit_plugin_cbp,
)
from .weights import compromise_weight_grid, shrinkage_grid


@dataclass(frozen=True)
class LatentClusters:
    """Two unmodeled latent groups: mean beta0 + beta1 Z_k, Z_k ~ Bern(1/2),
    unit variances 1/n_k with n_k = 10 Z_k + 2 (1 - Z_k); the analysis design
    is an intercept plus ``n_irrelevant`` standard-normal noise columns."""

    k: int = 30
    beta0: float = 0.0
    beta1: float = 1.0
    n_irrelevant: int = 0

    kind = "area"


@dataclass(frozen=True)
class InformativeSampleSize:
    """Means tied to sample size: Y_k = x_k'beta + rho tau n_k / sd(n)
    + v_k tau sqrt(1 - rho^2) + sigma e_k / sqrt(n_k), with log n_k equally
    spaced on [0, 3] and two standard-normal covariates in the analysis."""

    k: int = 50
    rho: float = 0.0
    sigma2: float = 1.0
    v_dist: str = "normal"  # normal | mixture | uniform
    tau: float = 0.5
    beta: tuple = (0.0, 0.0, 0.0)

    kind = "area"


@dataclass(frozen=True)
class PopAverage:
    """Population-average design: sample sizes from a log-linear softmax with
    spread calibrated to ``sigma_n`` (0.6 * n_bar when None), means
    c1 f1(n_k) + c2 v_k with f1 a centered probit ramp in log n."""

    k: int = 50
    sigma2: float = 1.0
    rho: float = 0.0
    xi: float = 1.0
    n_bar: float = 20.0
    sigma_n: float | None = None
    a: float | None = None

    kind = "popmean"

    @property
    def sigma_n_target(self) -> float:
        return 0.6 * self.n_bar if self.sigma_n is None else float(self.sigma_n)


@dataclass(frozen=True)
class SimScenario:
    design: object
    n_rep: int = 1000
    master_seed: int = 20240808

    def __post_init__(self):
        if self.n_rep < 1:
            raise ValueError("n_rep must be at least 1")


@dataclass(frozen=True)
class SimReport:
    methods: tuple
    mspe: dict
    mc_se: dict
    ratio_to_min: dict
    n_rep: int
    n_dropped: int = 0
    losses: np.ndarray | None = None

    def to_rows(self, setting: dict | None = None) -> list:
        setting = setting or {}
        rows = []
        for m in self.methods:
            row = dict(setting)
            row.update(
                method=m,
                mspe=self.mspe[m],
                mc_se=self.mc_se[m],
                ratio_to_min=self.ratio_to_min[m],
            )
            rows.append(row)
        return rows


@dataclass(frozen=True)
class OracleResult:
    alpha_or: float
    tau_or: float
    loss: float
    theta_hat: np.ndarray
    cbp_loss: float | None = None
    gap: float | None = None


def _rng(master_seed: int, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(rep_index,))
    )


@lru_cache(maxsize=64)
def _pop_average_constants(design: PopAverage):
    k = design.k
    if k < 2:
        raise InfeasibleScenarioError("population-average design needs K >= 2")
    idx = np.arange(1, k + 1)
    expo = (2.0 * idx - k - 1.0) / (k - 1.0)

    def sizes(a):
        w = np.exp(a * expo)
        return k * design.n_bar * w / w.sum()

    if design.a is not None:
        a = float(design.a)
    else:
        target = design.sigma_n_target

        def gap(a):
            return float(np.std(sizes(a), ddof=1)) - target

        hi = 1.0
        while gap(hi) < 0 and hi < 512:
            hi *= 2.0
        if gap(hi) < 0:
            raise InfeasibleScenarioError(
                f"cannot reach sd(n) = {target} with n_bar = {design.n_bar}"
            )
        a = float(brentq(gap, 1e-12, hi, xtol=1e-12))
    n = sizes(a)
    log_n = np.log(n)
    mu_ln = log_n.mean()
    sd_ln = np.std(log_n, ddof=1)
    f1 = ndtr(2.0 * (log_n - mu_ln) / sd_ln) - 0.5
    sigma_n = float(np.std(n, ddof=1))
    kappa_n = float(np.mean(f1 * n))
    sigma_f2 = float(np.sum(f1 * f1) / (k - 1))
    c1 = design.xi * design.rho * sigma_n / kappa_n
    disc = design.xi**2 - c1**2 * sigma_f2
    if disc < 0:
        raise InfeasibleScenarioError(
            f"(rho={design.rho}, xi={design.xi}) infeasible: the residual "
            f"variance share would be negative ({disc:.3g})"
        )
    c2 = float(np.sqrt(disc))
    return n, f1, a, c1, c2


def validate_design(design):
    """Raise early (before any replication) on infeasible parameters."""
    if isinstance(design, PopAverage):
        _pop_average_constants(design)
    elif isinstance(design, InformativeSampleSize):
        if design.v_dist not in ("normal", "mixture", "uniform"):
            raise InfeasibleScenarioError(f"unknown v_dist {design.v_dist!r}")
        if not -1.0 < design.rho < 1.0:
            raise InfeasibleScenarioError("rho must lie in (-1, 1)")
        if design.k < 2:
            raise InfeasibleScenarioError("need K >= 2")
    elif isinstance(design, LatentClusters):
        if design.k < 2 or design.n_irrelevant < 0:
            raise InfeasibleScenarioError("need K >= 2 and n_irrelevant >= 0")
    else:
        raise InfeasibleScenarioError(f"unknown design {type(design).__name__}")


def generate(scenario: SimScenario, rep_index: int):
    """Data for one replicate plus the truths needed for loss computation.

    Returns (AreaDataset, theta, mu) for the area designs and
    (PopMeanInput, theta, mu) for the population-average design.
    """
    if not 0 <= rep_index < scenario.n_rep:
        raise ValueError(f"rep_index {rep_index} outside [0, {scenario.n_rep})")
    d = scenario.design
    rng = _rng(scenario.master_seed, rep_index)
    if isinstance(d, LatentClusters):
        z = rng.binomial(1, 0.5, d.k).astype(float)
        n = 10.0 * z + 2.0 * (1.0 - z)
        sigma2 = 1.0 / n
        v = rng.normal(0.0, 1.0, d.k)
        e = rng.normal(0.0, 1.0, d.k)
        mu = d.beta0 + d.beta1 * z
        theta = mu + v
        y = theta + np.sqrt(sigma2) * e
        cols = [np.ones(d.k)]
        if d.n_irrelevant > 0:
            cols.append(rng.normal(0.0, 1.0, (d.k, d.n_irrelevant)))
        x = np.column_stack(cols)
        return AreaDataset(y=y, x=x, sigma2=sigma2, n=n), theta, mu
    if isinstance(d, InformativeSampleSize):
        n = np.exp(3.0 * np.arange(d.k) / (d.k - 1))
        sigma_n = float(np.std(n, ddof=1))
        x = np.column_stack([np.ones(d.k), rng.normal(0.0, 1.0, (d.k, 2))])
        if d.v_dist == "normal":
            v = rng.normal(0.0, 1.0, d.k)
        elif d.v_dist == "mixture":
            sign = np.where(rng.random(d.k) < 0.5, -1.0, 1.0)
            v = rng.normal(0.0, np.sqrt(0.5), d.k) + sign / np.sqrt(2.0)
        elif d.v_dist == "uniform":
            v = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), d.k)
        else:
            raise InfeasibleScenarioError(f"unknown v_dist {d.v_dist!r}")
        e = rng.normal(0.0, 1.0, d.k)
        beta = np.asarray(d.beta, dtype=float)
        mu = x @ beta + d.rho * d.tau * n / sigma_n
        theta = mu + v * d.tau * np.sqrt(1.0 - d.rho**2)
        y = theta + np.sqrt(d.sigma2) * e / np.sqrt(n)
        sigma2 = np.full(d.k, d.sigma2) / n
        return AreaDataset(y=y, x=x, sigma2=sigma2, n=n), theta, mu
    if isinstance(d, PopAverage):
        n, f1, _, c1, c2 = _pop_average_constants(d)
        v = rng.normal(0.0, 1.0, d.k)
        e = rng.normal(0.0, 1.0, d.k)
        mu = c1 * f1
        theta = mu + c2 * v
        y = theta + np.sqrt(d.sigma2 / n) * e
        return PopMeanInput(y=y, n=n, sigma2=d.sigma2), theta, mu
    raise InfeasibleScenarioError(f"unknown design {type(d).__name__}")


def _oracle_objective(data: AreaDataset, theta):
    y, x, s2 = data.y, data.x, data.sigma2
    theta = np.asarray(theta, dtype=float)

    def f(point):
        a, t = float(point[0]), float(point[1])
        inv = 1.0 / (s2 + t * t)
        wm = inv / inv.sum()
        raw = (s2 * inv) ** 2
        wb = raw / raw.sum()
        w = a * wm + (1.0 - a) * wb
        amat = x.T @ (w[:, None] * x)
        beta = np.linalg.solve(amat, x.T @ (w * y))
        pred = y - (s2 * inv) * (y - x @ beta)
        return float(np.mean((pred - theta) ** 2))

    return f


def _oracle_loss_grid(data, theta, alphas, taus):
    w = compromise_weight_grid(data.sigma2, alphas, taus)
    b = shrinkage_grid(data.sigma2, taus)
    a_n, t_n = len(alphas), len(taus)
    wf = w.reshape(a_n * t_n, data.k)
    bf = np.broadcast_to(b[None], (a_n, t_n, data.k)).reshape(a_n * t_n, data.k)
    amat = (wf[:, :, None] * data.x[None, :, :]).transpose(0, 2, 1) @ data.x
    rhs = (wf * data.y[None, :]) @ data.x
    beta = np.linalg.solve(amat, rhs[..., None])[..., 0]
    pred = data.y[None, :] - bf * (data.y[None, :] - beta @ data.x.T)
    return ((pred - np.asarray(theta)[None, :]) ** 2).mean(axis=1)


def oracle_fit(data: AreaDataset, true_theta, with_cbp: bool = True) -> OracleResult:
    """Best compromise hyperparameters for the realized loss (simulation
    diagnostic; requires the true effects)."""
    tau_max = tau_upper_bound(data.y)
    alphas = np.linspace(0.0, 1.0, 17)
    taus = np.concatenate(([0.0], np.geomspace(1e-3 * tau_max, tau_max, 32)))
    vals = _oracle_loss_grid(data, true_theta, alphas, taus)
    vals = np.where(np.isfinite(vals), vals, np.inf)
    picks = [int(np.argmin(vals))]
    picks += list(_local_minima_indices(vals, (len(alphas), len(taus))))
    picks = dedupe_lattice_picks(picks, (len(alphas), len(taus)))[:8]
    starts = [(alphas[i // len(taus)], taus[i % len(taus)]) for i in picks]
    f = _oracle_objective(data, true_theta)
    xbest, fun, _, _ = refine_points(
        f, (0.0, 0.0), (1.0, tau_max), starts, tie_break=("high", "low")
    )
    alpha_or, tau_or = float(xbest[0]), float(xbest[1])
    inv = 1.0 / (data.sigma2 + tau_or**2)
    wm = inv / inv.sum()
    raw = (data.sigma2 * inv) ** 2
    wb = raw / raw.sum()
    w = alpha_or * wm + (1.0 - alpha_or) * wb
    amat = data.x.T @ (w[:, None] * data.x)
    beta = solve_normal_equations(amat, data.x.T @ (w * data.y))
    pred = data.y - (data.sigma2 * inv) * (data.y - data.x @ beta)
    cbp_loss = gap = None
    if with_cbp:
        cbp = fit_cbp(data)
        cbp_loss = float(np.mean((cbp.theta_hat - np.asarray(true_theta)) ** 2))
        gap = cbp_loss - float(fun)
    return OracleResult(
        alpha_or=alpha_or,
        tau_or=tau_or,
        loss=float(fun),
        theta_hat=pred,
        cbp_loss=cbp_loss,
        gap=gap,
    )


# Method registries; every entry takes (data, true_theta) and returns the
# per-area predictions (area designs) or the scalar estimate (popmean design).
AREA_METHODS = {
    "eblup_mle": lambda d, t: fit_eblup(d, "mle").theta_hat,
    "eblup_reml": lambda d, t: fit_eblup(d, "reml").theta_hat,
    "eblup_ure": lambda d, t: fit_eblup(d, "ure").theta_hat,
    "obp": lambda d, t: fit_obp(d).theta_hat,
    "cbp": lambda d, t: fit_cbp(d).theta_hat,
    "cbp_plugin": lambda d, t: fit_plugin_cbp(d).theta_hat,
    "cbp_multitau": lambda d, t: fit_multitau_cbp(d).theta_hat,
    "oracle": lambda d, t: oracle_fit(d, t, with_cbp=False).theta_hat,
}

POPMEAN_METHODS = {
    "direct": lambda d, t: mu_direct(d).mu_hat,
    "minvar": lambda d, t: mu_minvar(d).mu_hat,
    "direct_compromise": lambda d, t: mu_direct_compromise(d).mu_hat,
    "spline": lambda d, t: mu_spline_regression(d).mu_hat,
    "eblup_reml": lambda d, t: mu_eblup(d, "reml").mu_hat,
    "obp": lambda d, t: mu_obp(d).mu_hat,
    "cbp": lambda d, t: mu_cbp(d).mu_hat,
    "cbp_plugin": lambda d, t: mu_plugin_cbp(d).mu_hat,
}


def methods_for(design) -> dict:
    return POPMEAN_METHODS if design.kind == "popmean" else AREA_METHODS


def _replicate_losses(scenario, methods, registry, rep_index):
    data, theta, _ = generate(scenario, rep_index)
    out = {}
    errors = {}
    for m in methods:
        try:
            pred = registry[m](data, theta)
            if scenario.design.kind == "popmean":
                loss = (float(pred) - float(np.mean(theta))) ** 2
            else:
                loss = float(np.sum((np.asarray(pred) - theta) ** 2))
            out[m] = loss
        except Exception as exc:  # noqa: BLE001 - recorded and rationed below
            out[m] = np.nan
            errors[m] = repr(exc)
    return out, errors


def run_study(
    scenario: SimScenario,
    methods,
    threads: int = 1,
    keep_losses: bool = False,
) -> SimReport:
    """Estimate the MSPE of each method over ``scenario.n_rep`` replicates.

    All methods see identical data within a replicate. A method failing on
    more than 0.1% of replicates aborts the study; rarer failures drop the
    replicate for every method so comparisons stay paired.
    """
    methods = list(methods)
    if not methods:
        raise ValueError("methods must be nonempty")
    validate_design(scenario.design)
    registry = methods_for(scenario.design)
    unknown = [m for m in methods if m not in registry]
    if unknown:
        raise ValueError(
            f"unknown methods {unknown} for {scenario.design.kind} designs; "
            f"available: {sorted(registry)}"
        )

    def work(i):
        return _replicate_losses(scenario, methods, registry, i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(scenario.n_rep)))
    else:
        results = [work(i) for i in range(scenario.n_rep)]

    losses = np.array([[res[0][m] for m in methods] for res in results])
    error_counts = {m: 0 for m in methods}
    samples = {}
    for res in results:
        for m, msg in res[1].items():
            error_counts[m] += 1
            samples.setdefault(m, msg)
    limit = 0.001 * scenario.n_rep
    for m, cnt in error_counts.items():
        if cnt > limit:
            raise RuntimeError(
                f"method {m!r} failed on {cnt}/{scenario.n_rep} replicates "
                f"(> 0.1%); first error: {samples[m]}"
            )
    ok = ~np.isnan(losses).any(axis=1)
    kept = losses[ok]
    n_dropped = int(scenario.n_rep - kept.shape[0])
    if kept.shape[0] == 0:
        raise RuntimeError("all replicates failed")
    mspe = {m: float(kept[:, j].mean()) for j, m in enumerate(methods)}
    mc_se = {
        m: float(kept[:, j].std(ddof=1) / np.sqrt(kept.shape[0]))
        if kept.shape[0] > 1
        else float("nan")
        for j, m in enumerate(methods)
    }
    best = min(mspe.values())
    ratio = {m: float(mspe[m] / best) for m in methods}
    return SimReport(
        methods=tuple(methods),
        mspe=mspe,
        mc_se=mc_se,
        ratio_to_min=ratio,
        n_rep=scenario.n_rep,
        n_dropped=n_dropped,
        losses=kept if keep_losses else None,
    )
