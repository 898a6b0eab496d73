"""Input containers and validation helpers for per-area data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InsufficientDataError


def check_vector(v, name, k=None, positive=False, nonnegative=False):
    """Coerce ``v`` to a finite float64 1-D array, with optional sign checks."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if k is not None and arr.shape[0] != k:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {k}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if positive and np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive")
    if nonnegative and np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative")
    return arr


def check_matrix(m, name, rows=None):
    """Coerce ``m`` to a finite float64 2-D array."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_tau(tau):
    t = float(tau)
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"tau must be finite and nonnegative, got {tau}")
    return t


def check_alpha(alpha):
    a = float(alpha)
    if not np.isfinite(a) or a < 0.0 or a > 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return a


@dataclass(frozen=True)
class AreaDataset:
    """Direct estimates for K areas with covariates and known sampling variances.

    Attributes
    ----------
    y : (K,) direct estimates, one per area.
    x : (K, p) design matrix; a leading all-ones column plays the intercept.
    sigma2 : (K,) known sampling variances, strictly positive.
    area_ids : optional labels, defaults to "0".."K-1".
    n : optional per-area unit sample sizes (used by population-mean tools).
    """

    y: np.ndarray
    x: np.ndarray
    sigma2: np.ndarray
    area_ids: tuple = ()
    n: np.ndarray | None = None

    def __post_init__(self):
        y = check_vector(self.y, "y")
        k = y.shape[0]
        x = check_matrix(self.x, "x", rows=k)
        sigma2 = check_vector(self.sigma2, "sigma2", k=k, positive=True)
        if x.shape[1] > k:
            raise InsufficientDataError(
                f"design has p={x.shape[1]} columns but only K={k} areas"
            )
        ids = tuple(self.area_ids) if self.area_ids else tuple(str(i) for i in range(k))
        if len(ids) != k:
            raise ValueError(f"area_ids has length {len(ids)}, expected {k}")
        n = None
        if self.n is not None:
            n = check_vector(self.n, "n", k=k, positive=True)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "area_ids", ids)
        object.__setattr__(self, "n", n)

    @property
    def k(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class PopMeanInput:
    """Per-unit means with sample sizes under Var(Y_k | theta_k) = sigma2 / n_k."""

    y: np.ndarray
    n: np.ndarray
    sigma2: float
    area_ids: tuple = field(default=())

    def __post_init__(self):
        y = check_vector(self.y, "y")
        n = check_vector(self.n, "n", k=y.shape[0], positive=True)
        s2 = float(self.sigma2)
        if not np.isfinite(s2) or s2 <= 0:
            raise ValueError(f"sigma2 must be a positive scalar, got {self.sigma2}")
        ids = tuple(self.area_ids) if self.area_ids else tuple(
            str(i) for i in range(y.shape[0])
        )
        if len(ids) != y.shape[0]:
            raise ValueError(f"area_ids has length {len(ids)}, expected {y.shape[0]}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "area_ids", ids)

    @property
    def k(self) -> int:
        return self.y.shape[0]

    @property
    def sigma2_vec(self) -> np.ndarray:
        """Per-unit sampling variances sigma2 / n_k."""
        return self.sigma2 / self.n

    @property
    def n_mean(self) -> float:
        """Arithmetic mean of the unit sample sizes."""
        return float(np.mean(self.n))

    @property
    def n_harmonic(self) -> float:
        """Harmonic mean of the unit sample sizes."""
        return float(1.0 / np.mean(1.0 / self.n))

    def as_area_dataset(self) -> AreaDataset:
        """Intercept-only view used by the model-based population-mean methods."""
        return AreaDataset(
            y=self.y,
            x=np.ones((self.k, 1)),
            sigma2=self.sigma2_vec,
            area_ids=self.area_ids,
            n=self.n,
        )
