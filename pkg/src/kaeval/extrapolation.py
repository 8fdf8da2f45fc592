"""KA-AUC as a function of feature-column (site) count, and the saturation
fit AUC(t) = a + b * exp(-c * t^d) whose parameter a estimates the score of
the full population.

The four-parameter exponential is ill-conditioned, so the fit runs a damped
iterative least-squares solver from a fixed grid of 16 starts plus a flat
fallback and keeps the best residual; identical inputs give identical fits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .dataset import AlignedDataset
from .errors import ValidationError
from .kernel import DEFAULT_QUANTILES, evaluate_dataset
from .rng import keyed_rng

C_BOUNDS = (1e-12, 1e3)
D_BOUNDS = (1e-12, 4.0)


@dataclass(frozen=True)
class SamplingCurve:
    """Mean/std KA-AUC at each sampled site count."""

    t: tuple
    mean_auc: tuple
    std_auc: tuple
    repeats: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(int(v) for v in self.t))
        object.__setattr__(self, "mean_auc", tuple(float(v) for v in self.mean_auc))
        object.__setattr__(self, "std_auc", tuple(float(v) for v in self.std_auc))
        if len(self.t) != len(self.mean_auc) or len(self.t) != len(self.std_auc):
            raise ValidationError("sampling curve columns differ in length")
        if any(b <= a for a, b in zip(self.t, self.t[1:])):
            raise ValidationError("site counts must be strictly increasing")
        if self.repeats < 1:
            raise ValidationError(f"repeats must be >= 1, got {self.repeats}")
        if any(not (0.0 <= m <= 1.0) for m in self.mean_auc):
            raise ValidationError("mean AUC outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "t": list(self.t),
            "mean_auc": list(self.mean_auc),
            "std_auc": list(self.std_auc),
            "repeats": self.repeats,
            "seed": self.seed,
        }


def subsample_sites_auc(ad: AlignedDataset, t_grid: Sequence[int], repeats: int,
                        seed: int = 0,
                        quantiles: Sequence[float] = DEFAULT_QUANTILES,
                        encoding: str = "standardized") -> SamplingCurve:
    """KA-AUC over `repeats` uniform column subsets at each count in t_grid.

    Column draws are without replacement, fresh per repeat, keyed by
    (seed, t, repeat). Std is population (zero for repeats = 1).
    """
    t_grid = sorted(int(t) for t in t_grid)
    if len(set(t_grid)) != len(t_grid):
        raise ValidationError("duplicate site counts in grid")
    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")
    p = ad.p
    for t in t_grid:
        if t < 1:
            raise ValidationError(f"site count must be >= 1, got {t}")
        if t > p:
            raise ValidationError(f"site count {t} exceeds available sites {p}")
    means, stds = [], []
    for t in t_grid:
        aucs = []
        for r in range(repeats):
            rng = keyed_rng(seed, t, r)
            cols = np.sort(rng.permutation(p)[:t])
            result = evaluate_dataset(ad.select_sites(cols), quantiles=quantiles,
                                      encoding=encoding)
            aucs.append(result.auc)
        aucs = np.asarray(aucs)
        means.append(float(aucs.mean()))
        stds.append(float(aucs.std()))
    return SamplingCurve(t=tuple(t_grid), mean_auc=tuple(means), std_auc=tuple(stds),
                         repeats=repeats, seed=int(seed))


@dataclass(frozen=True)
class SaturationFit:
    """Parameters of AUC(t) = a + b * exp(-c * t^d_exp)."""

    a: float
    b: float
    c: float
    d_exp: float
    rss: float
    converged: bool

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0):
            raise ValidationError(f"asymptote a out of [0, 1]: {self.a}")
        if self.c <= 0 or self.d_exp <= 0:
            raise ValidationError("rate parameters must be positive")

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "d_exp": self.d_exp,
            "rss": self.rss,
            "converged": self.converged,
        }


def _model(params: np.ndarray, t: np.ndarray) -> np.ndarray:
    a, b, c, d = params
    return a + b * np.exp(-c * np.power(t, d))


def fit_saturation_points(t: Sequence[float], auc: Sequence[float]) -> SaturationFit:
    """Fit the saturation model to (site count, AUC) points."""
    t = np.asarray([float(v) for v in t])
    y = np.asarray([float(v) for v in auc])
    if t.shape != y.shape:
        raise ValidationError("t and AUC lists differ in length")
    if np.any(t <= 0):
        raise ValidationError("site counts must be positive")
    if len(np.unique(t)) < 4:
        raise ValidationError(
            f"need at least 4 distinct site counts for a 4-parameter fit, "
            f"got {len(np.unique(t))}"
        )
    lower = np.array([0.0, -np.inf, C_BOUNDS[0], D_BOUNDS[0]])
    upper = np.array([1.0, np.inf, C_BOUNDS[1], D_BOUNDS[1]])

    def residuals(params):
        return _model(params, t) - y

    a0 = min(max(float(y.max()), 0.0), 1.0)
    b0 = float(y[0]) - a0
    candidates = []  # (rss, order, params, solver_ok)
    order = 0
    for c0 in np.logspace(-3, 0, 4):
        for d0 in np.logspace(np.log10(0.25), np.log10(2.0), 4):
            x0 = np.array([a0, b0, c0, d0])
            try:
                res = least_squares(residuals, x0, bounds=(lower, upper), method="trf")
            except Exception:
                order += 1
                continue
            rss = float(np.sum(res.fun ** 2))
            candidates.append((rss, order, res.x, bool(res.status > 0)))
            order += 1
    # flat fallback guarantees the fit never loses to a constant model
    flat_a = min(max(float(y.mean()), 0.0), 1.0)
    flat = np.array([flat_a, 0.0, 1.0, 1.0])
    candidates.append((float(np.sum((flat_a - y) ** 2)), order, flat, True))
    rss, _, best, solver_ok = min(candidates, key=lambda item: (item[0], item[1]))
    return SaturationFit(a=float(best[0]), b=float(best[1]), c=float(best[2]),
                         d_exp=float(best[3]), rss=rss, converged=solver_ok)


def fit_saturation(sc: SamplingCurve) -> SaturationFit:
    """Fit the saturation model to a sampling curve's mean AUCs (unweighted)."""
    return fit_saturation_points(sc.t, sc.mean_auc)


def predict_auc(fit: SaturationFit, t) -> np.ndarray | float:
    """Evaluate the fitted model at site count(s) t > 0."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr <= 0):
        raise ValidationError("site count must be positive")
    out = _model(np.array([fit.a, fit.b, fit.c, fit.d_exp]), arr)
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out
