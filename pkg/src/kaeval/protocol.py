"""Evaluation protocol: seeded class-balanced subsets, per-subset curves,
AUC statistics, and paired comparison between representations.

Each subset draws a fixed fraction of every class without replacement and
then equalizes class counts to the smallest draw. Draws come from a
counter-based generator keyed by (seed, subset index), so a report is a pure
function of (dataset, seed, parameters).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .dataset import AlignedDataset, LabelFrame
from .errors import ValidationError
from .kernel import DEFAULT_QUANTILES, evaluate_dataset
from .rng import keyed_rng

ENVELOPE_GRID_POINTS = 512


@dataclass(frozen=True)
class SubsetSpec:
    """Deterministic class-balanced index lists into an aligned dataset."""

    seed: int
    n_subsets: int
    fraction: float
    subsets: tuple  # tuple of int tuples, each sorted ascending

    def __post_init__(self):
        if self.n_subsets < 1:
            raise ValidationError(f"need at least 1 subset, got {self.n_subsets}")
        if not (0.0 < self.fraction <= 1.0):
            raise ValidationError(f"fraction must lie in (0, 1], got {self.fraction}")
        subsets = tuple(tuple(int(i) for i in s) for s in self.subsets)
        for s in subsets:
            if len(set(s)) != len(s):
                raise ValidationError("subset contains repeated indices")
        object.__setattr__(self, "subsets", subsets)


def make_subsets(source: Union[LabelFrame, AlignedDataset], n_subsets: int = 10,
                 fraction: float = 0.8, seed: int = 0) -> SubsetSpec:
    """Draw n_subsets class-equalized index lists.

    Per subset and class c, floor(fraction * n_c) indices are drawn without
    replacement; every class is then truncated to the smallest per-class
    draw so counts are exactly equal. Indices refer to the row order of
    `source` and are returned sorted.
    """
    if n_subsets < 1:
        raise ValidationError(f"need at least 1 subset, got {n_subsets}")
    if not (0.0 < fraction <= 1.0):
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    labels = source.classes if isinstance(source, LabelFrame) else source.labels
    labels = np.asarray(labels)
    class_names = sorted(set(labels.tolist()))
    class_rows = {c: np.flatnonzero(labels == c) for c in class_names}
    draw_sizes = {c: int(np.floor(fraction * len(rows))) for c, rows in class_rows.items()}
    per_class = min(draw_sizes.values())
    if per_class < 1:
        smallest = min(class_rows, key=lambda c: len(class_rows[c]))
        raise ValidationError(
            f"empty class after truncation: class {smallest!r} has "
            f"{len(class_rows[smallest])} members at fraction {fraction}"
        )
    subsets = []
    for s in range(n_subsets):
        rng = keyed_rng(seed, s)
        chosen = []
        for c in class_names:
            drawn = rng.permutation(class_rows[c])[: draw_sizes[c]]
            chosen.append(drawn[:per_class])
        subsets.append(tuple(np.sort(np.concatenate(chosen)).tolist()))
    return SubsetSpec(seed=int(seed), n_subsets=n_subsets, fraction=float(fraction),
                      subsets=tuple(subsets))


@dataclass(frozen=True)
class LevelResult:
    """Protocol outcome for one variation level."""

    level: str
    auc_per_subset: tuple
    auc_mean: float
    auc_std: float
    envelope_grid: np.ndarray
    envelope_min: np.ndarray
    envelope_max: np.ndarray
    envelope_mean: np.ndarray
    curves: tuple  # per-subset accuracy arrays on their own d/D grids
    subset_size: int
    n: int
    k: int

    def __post_init__(self):
        if self.auc_std < 0:
            raise ValidationError("negative AUC standard deviation")
        below = self.envelope_mean < self.envelope_min - 1e-12
        above = self.envelope_mean > self.envelope_max + 1e-12
        if below.any() or above.any():
            raise ValidationError("envelope does not bracket the mean curve")

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "auc_mean": float(self.auc_mean),
            "auc_std": float(self.auc_std),
            "auc_per_subset": [float(a) for a in self.auc_per_subset],
            "envelope": {
                "grid": self.envelope_grid.tolist(),
                "min": self.envelope_min.tolist(),
                "max": self.envelope_max.tolist(),
                "mean": self.envelope_mean.tolist(),
            },
            "subset_size": self.subset_size,
            "n": self.n,
            "k": self.k,
        }


@dataclass(frozen=True)
class ProtocolReport:
    """Per-level protocol results plus the parameters that produced them."""

    levels: dict
    seed: int
    quantiles: tuple
    n_subsets: int
    fraction: float
    encoding: str

    def level(self, name: str) -> LevelResult:
        if name not in self.levels:
            raise ValidationError(
                f"level {name!r} not in report; has {sorted(self.levels)}"
            )
        return self.levels[name]

    def to_dict(self) -> dict:
        return {
            "levels": {name: res.to_dict() for name, res in sorted(self.levels.items())},
            "seed": self.seed,
            "quantiles": list(self.quantiles),
            "n_subsets": self.n_subsets,
            "fraction": self.fraction,
            "encoding": self.encoding,
        }

    def to_json(self, **extra) -> str:
        doc = self.to_dict()
        doc.update(extra)
        return json.dumps(doc)


def merge_reports(reports: Sequence[ProtocolReport]) -> ProtocolReport:
    """Combine single-level reports produced with identical parameters."""
    if not reports:
        raise ValidationError("no reports to merge")
    first = reports[0]
    levels: dict = {}
    for rep in reports:
        if (rep.seed, rep.quantiles, rep.n_subsets, rep.fraction, rep.encoding) != (
            first.seed, first.quantiles, first.n_subsets, first.fraction, first.encoding
        ):
            raise ValidationError("cannot merge reports with different parameters")
        for name, res in rep.levels.items():
            if name in levels:
                raise ValidationError(f"duplicate level {name!r} across reports")
            levels[name] = res
    return ProtocolReport(levels=levels, seed=first.seed, quantiles=first.quantiles,
                          n_subsets=first.n_subsets, fraction=first.fraction,
                          encoding=first.encoding)


def run_protocol(ad: AlignedDataset, subsets: SubsetSpec,
                 quantiles: Sequence[float] = DEFAULT_QUANTILES,
                 encoding: str = "standardized",
                 workers: int = 1) -> ProtocolReport:
    """Score every subset and aggregate mean, std, and accuracy envelope.

    Subsets are independent; with workers > 1 they evaluate concurrently and
    results are joined in subset order, so output does not depend on the
    worker count. Curves are compared on a common 512-point d/D grid by
    linear interpolation.
    """

    def run_one(item):
        sid, idx = item
        return evaluate_dataset(ad.subset(idx), quantiles=quantiles,
                                encoding=encoding, subset_id=sid)

    tasks = list(enumerate(subsets.subsets))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, tasks))
    else:
        results = [run_one(t) for t in tasks]

    aucs = np.array([r.auc for r in results])
    grid = np.linspace(0.0, 1.0, ENVELOPE_GRID_POINTS)
    interp = np.stack([
        np.interp(grid, r.curve.complexity, r.curve.accuracy) for r in results
    ])
    level = LevelResult(
        level=ad.variation.value,
        auc_per_subset=tuple(float(a) for a in aucs),
        auc_mean=float(aucs.mean()),
        auc_std=float(aucs.std(ddof=1)) if len(aucs) > 1 else 0.0,
        envelope_grid=grid,
        envelope_min=interp.min(axis=0),
        envelope_max=interp.max(axis=0),
        envelope_mean=interp.mean(axis=0),
        curves=tuple(r.curve.accuracy for r in results),
        subset_size=len(subsets.subsets[0]),
        n=ad.n,
        k=ad.k,
    )
    return ProtocolReport(
        levels={level.level: level},
        seed=subsets.seed,
        quantiles=tuple(float(q) for q in quantiles),
        n_subsets=subsets.n_subsets,
        fraction=subsets.fraction,
        encoding=encoding,
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Paired comparison of two reports at one level."""

    level: str
    delta_auc: float
    p_value: float
    n_subsets: int
    n_permutations: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "delta_auc": self.delta_auc,
            "p_value": self.p_value,
            "n_subsets": self.n_subsets,
            "n_permutations": self.n_permutations,
            "seed": self.seed,
        }


def compare(a: ProtocolReport, b: ProtocolReport, level: str,
            n_permutations: int = 10_000, seed: int = 0) -> ComparisonReport:
    """Mean AUC difference with a paired sign-flip permutation p-value.

    Two-sided with add-one correction; paired sign flips need no
    distributional assumptions about the per-subset scores.
    """
    res_a, res_b = a.level(level), b.level(level)
    if len(res_a.auc_per_subset) != len(res_b.auc_per_subset):
        raise ValidationError(
            f"subset-count mismatch at level {level!r}: "
            f"{len(res_a.auc_per_subset)} vs {len(res_b.auc_per_subset)}"
        )
    diffs = np.asarray(res_a.auc_per_subset) - np.asarray(res_b.auc_per_subset)
    observed = float(diffs.mean())
    rng = keyed_rng(seed, 0)
    signs = rng.choice([-1.0, 1.0], size=(n_permutations, len(diffs)))
    perm_means = (signs * diffs).mean(axis=1)
    count = int((np.abs(perm_means) >= abs(observed)).sum())
    p_value = (1 + count) / (1 + n_permutations)
    return ComparisonReport(
        level=level,
        delta_auc=observed,
        p_value=float(p_value),
        n_subsets=len(diffs),
        n_permutations=n_permutations,
        seed=int(seed),
    )
