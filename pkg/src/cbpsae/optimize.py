"""Grid-seeded bounded minimization in one to four dimensions.

All searches evaluate a deterministic seed grid first, refine a handful of
promising seeds (global best, grid-local minima), and return the best point
seen, so the result is never worse than any seed and is reproducible across
runs and thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .exceptions import NonFiniteObjectiveError, OptimizationError

_MAX_REFINE = 12


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned search box with per-coordinate seed counts.

    ``seed_values`` optionally fixes the exact seed positions per coordinate
    (e.g. a log-spaced grid); otherwise seeds are linearly spaced.
    """

    lower: tuple
    upper: tuple
    grid_seeds: tuple
    seed_values: tuple | None = None

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        gs = tuple(int(g) for g in np.atleast_1d(self.grid_seeds))
        if len(lo) != len(hi) or len(lo) != len(gs):
            raise ValueError("lower, upper, grid_seeds must share a length")
        if not 1 <= len(lo) <= 4:
            raise ValueError("box dimension must be between 1 and 4")
        for a, b in zip(lo, hi):
            if not (np.isfinite(a) and np.isfinite(b) and a <= b):
                raise ValueError(f"invalid bounds ({a}, {b})")
        for g in gs:
            if g < 2:
                raise ValueError("grid_seeds must be at least 2 per coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "grid_seeds", gs)
        if self.seed_values is not None:
            sv = tuple(np.sort(np.asarray(s, dtype=float)) for s in self.seed_values)
            if len(sv) != len(lo):
                raise ValueError("seed_values must give one array per coordinate")
            object.__setattr__(self, "seed_values", sv)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def seeds_along(self, axis: int) -> np.ndarray:
        if self.seed_values is not None:
            return self.seed_values[axis]
        return np.linspace(self.lower[axis], self.upper[axis], self.grid_seeds[axis])


@dataclass(frozen=True)
class OptResult:
    x: np.ndarray
    fun: float
    n_eval: int
    converged: bool


class _Counted:
    def __init__(self, f):
        self.f = f
        self.n = 0

    def __call__(self, x):
        self.n += 1
        return float(self.f(x))


def _tie_key(x, tie_break):
    # Smaller key wins; "high" coordinates prefer larger values on ties.
    return tuple(-v if t == "high" else v for v, t in zip(x, tie_break))


# Candidates within this relative window of the best value count as tied, so
# the coordinate tie-break rule decides instead of sub-noise float deltas.
_TIE_RTOL = 1e-12


def _select_candidate(cands, key):
    """Pick from (value, point) pairs: best value, near-ties broken by key."""
    best = min(c[0] for c in cands)
    tol = _TIE_RTOL * (1.0 + abs(best))
    pool = [c for c in cands if c[0] <= best + tol]
    return min(pool, key=lambda c: key(c[1]))


def _grad_central(f, x, lower, upper):
    """Central-difference gradient with box-clipped evaluation points."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = 1e-6 * (1.0 + abs(x[i]))
        up = min(x[i] + h, upper[i])
        dn = max(x[i] - h, lower[i])
        if up <= dn:
            g[i] = 0.0
            continue
        xp = x.copy()
        xp[i] = up
        xm = x.copy()
        xm[i] = dn
        g[i] = (f(xp) - f(xm)) / (up - dn)
    return g


def minimize_1d(f, box: BoxSpec, xatol: float | None = None, tie: str = "low") -> OptResult:
    """Bounded scalar minimization: seed grid plus bracketed local refinement.

    The returned objective never exceeds the best seed value. Exact ties are
    broken toward the smaller coordinate (or larger, with ``tie="high"``).
    A non-finite objective value raises NonFiniteObjectiveError naming the
    offending point.
    """
    if box.dim != 1:
        raise ValueError("minimize_1d requires a one-dimensional box")
    lo, hi = box.lower[0], box.upper[0]
    counted = _Counted(lambda v: f(float(np.atleast_1d(v)[0])))
    seeds = box.seeds_along(0)
    try:
        vals = np.asarray(f(seeds), dtype=float)
        if vals.shape != seeds.shape:
            raise TypeError
        counted.n += seeds.size
    except (TypeError, ValueError, IndexError):
        vals = np.array([counted(s) for s in seeds])
    bad = ~np.isfinite(vals)
    if bad.any():
        raise NonFiniteObjectiveError(
            f"objective returned a non-finite value at x={seeds[bad][0]}",
            x=float(seeds[bad][0]),
        )
    if xatol is None:
        xatol = 1e-8 * max(hi - lo, 1e-300)

    # Candidates: every seed, plus refinements around the best seed and any
    # interior grid-local minima.
    order = np.argsort(vals, kind="stable")
    local = [
        i
        for i in range(len(seeds))
        if (i == 0 or vals[i] <= vals[i - 1])
        and (i == len(seeds) - 1 or vals[i] <= vals[i + 1])
    ]
    picks = list(dict.fromkeys([int(order[0])] + local))[:_MAX_REFINE]

    cands = [(float(v), float(s)) for s, v in zip(seeds, vals)]
    converged = True
    for i in picks:
        left = seeds[i - 1] if i > 0 else lo
        right = seeds[i + 1] if i < len(seeds) - 1 else hi
        left, right = max(left, lo), min(right, hi)
        if right - left <= xatol:
            continue
        res = minimize_scalar(
            counted, bounds=(left, right), method="bounded",
            options={"xatol": xatol, "maxiter": 500},
        )
        if np.isfinite(res.fun):
            cands.append((float(res.fun), float(np.clip(res.x, lo, hi))))
        else:
            converged = False
    best = _select_candidate(cands, lambda x: x if tie == "low" else -x)
    return OptResult(
        x=np.array([best[1]]), fun=best[0], n_eval=counted.n, converged=converged
    )


def _lattice(box: BoxSpec):
    axes = [box.seeds_along(i) for i in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), [len(a) for a in axes]


def _local_minima_indices(vals, shape):
    """Indices of lattice points no worse than any axis neighbor."""
    grid = vals.reshape(shape)
    mask = np.ones_like(grid, dtype=bool)
    for axis in range(grid.ndim):
        lead = np.moveaxis(grid, axis, 0)
        m = np.moveaxis(mask, axis, 0)
        m[1:] &= lead[1:] <= lead[:-1]
        m[:-1] &= lead[:-1] <= lead[1:]
    return np.flatnonzero(mask.ravel())


def dedupe_lattice_picks(picks, shape, radius: int = 1):
    """Drop picks within ``radius`` lattice cells (Chebyshev) of an earlier
    pick; neighbors refine into the same basin, so one start suffices."""
    kept = []
    kept_idx = []
    for flat in picks:
        idx = np.unravel_index(int(flat), shape)
        if any(
            max(abs(a - b) for a, b in zip(idx, other)) <= radius
            for other in kept_idx
        ):
            continue
        kept.append(int(flat))
        kept_idx.append(idx)
    return kept


def refine_points(f, lower, upper, starts, tie_break=None, include_starts=True):
    """Run bounded quasi-Newton (numerical central-difference gradients) from
    each start; return (x, fun, n_eval, converged) for the best point seen."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dim = lower.size
    if tie_break is None:
        tie_break = ("low",) * dim
    counted = _Counted(lambda x: f(np.asarray(x, dtype=float)))
    bounds = list(zip(lower, upper))
    cands = []
    any_ok = False
    for x0 in starts:
        x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
        f0 = counted(x0)
        if include_starts and np.isfinite(f0):
            cands.append((f0, tuple(x0)))
        res = minimize(
            counted,
            x0,
            jac=lambda x: _grad_central(counted, x, lower, upper),
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 100, "ftol": 1e-12, "gtol": 1e-9},
        )
        if np.isfinite(res.fun):
            any_ok = True
            cands.append((float(res.fun), tuple(np.clip(res.x, lower, upper))))
    if not cands:
        raise OptimizationError("no finite objective value found among starts")
    best = _select_candidate(cands, lambda x: _tie_key(x, tie_break))
    return np.asarray(best[1]), best[0], counted.n, any_ok


def minimize_box(
    f,
    box: BoxSpec,
    tie_break=None,
    refine_top: int = 5,
    extra_starts=None,
) -> OptResult:
    """Grid-seeded bounded quasi-Newton minimization over a box.

    Seeds the lattice implied by ``box``, refines the best ``refine_top``
    seeds together with all lattice-local minima (capped), and returns the
    best candidate. Deterministic: exact ties are broken by the per-coordinate
    ``tie_break`` rule ("low" by default).
    """
    pts, shape = _lattice(box)
    nvec = 0
    try:
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape != (pts.shape[0],):
            raise TypeError
        nvec = pts.shape[0]
    except (TypeError, ValueError, IndexError):
        vals = np.array([float(f(p)) for p in pts])
        nvec = pts.shape[0]
    finite = np.isfinite(vals)
    if not finite.any():
        raise NonFiniteObjectiveError(
            "objective is non-finite at every seed point", x=pts[0]
        )
    vals = np.where(finite, vals, np.inf)

    order = np.argsort(vals, kind="stable")
    picks = list(order[: max(refine_top, 1)])
    picks += [i for i in _local_minima_indices(vals, shape) if np.isfinite(vals[i])]
    picks = list(dict.fromkeys(int(i) for i in picks))[:_MAX_REFINE]
    starts = [pts[i] for i in picks]
    if extra_starts is not None:
        starts += [np.asarray(s, dtype=float) for s in extra_starts]

    x, fun, n_inner, ok = refine_points(
        f, box.lower, box.upper, starts, tie_break=tie_break
    )
    if tie_break is None:
        tie_break = ("low",) * box.dim
    # Seeds themselves stay in the candidate pool.
    cands = [(float(fun), tuple(x))]
    cands += [
        (float(vals[i]), tuple(pts[i])) for i in range(pts.shape[0]) if finite[i]
    ]
    fun, x = _select_candidate(cands, lambda p: _tie_key(p, tie_break))
    return OptResult(
        x=np.asarray(x), fun=float(fun), n_eval=nvec + n_inner, converged=ok
    )
