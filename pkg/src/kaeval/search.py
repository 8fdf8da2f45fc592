"""Random search over a parameter space with train-to-test transfer analysis.

The evaluator is caller-supplied: it maps one parameter assignment to a
training dataset and per-level testing datasets, all scored with the
standard curve pipeline. A built-in synthetic family (clusters with a noise
knob and an AUC-neutral rotation knob) exercises the harness end to end.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import AlignedDataset, Variation, align
from .errors import ValidationError
from .kernel import DEFAULT_QUANTILES, evaluate_dataset
from .rng import keyed_rng
from .synth import SynthSpec, generate


@dataclass(frozen=True)
class ChoiceDim:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValidationError("choice dimension has no values")

    def sample(self, rng: np.random.Generator):
        return self.values[int(rng.integers(len(self.values)))]

    def to_dict(self) -> dict:
        return {"type": "choice", "values": list(self.values)}


@dataclass(frozen=True)
class UniformDim:
    low: float
    high: float

    def __post_init__(self):
        if not (self.low < self.high):
            raise ValidationError(
                f"degenerate uniform bounds [{self.low}, {self.high}]"
            )

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))

    def to_dict(self) -> dict:
        return {"type": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class IntDim:
    low: int
    high: int

    def __post_init__(self):
        if not (self.low < self.high):
            raise ValidationError(
                f"degenerate integer bounds [{self.low}, {self.high}]"
            )

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.low, self.high + 1))

    def to_dict(self) -> dict:
        return {"type": "int", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class ParamSpace:
    """Named search dimensions, sampled in sorted-name order."""

    dims: dict

    def __post_init__(self):
        if not self.dims:
            raise ValidationError("parameter space has no dimensions")

    def sample(self, seed: int, draw: int) -> dict:
        rng = keyed_rng(seed, draw)
        return {name: self.dims[name].sample(rng) for name in sorted(self.dims)}

    def to_dict(self) -> dict:
        return {name: dim.to_dict() for name, dim in sorted(self.dims.items())}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ParamSpace":
        dims = {}
        for name, spec in doc.items():
            kind = spec.get("type")
            if kind == "choice":
                dims[name] = ChoiceDim(values=tuple(spec["values"]))
            elif kind == "uniform":
                dims[name] = UniformDim(low=float(spec["low"]), high=float(spec["high"]))
            elif kind == "int":
                dims[name] = IntDim(low=int(spec["low"]), high=int(spec["high"]))
            else:
                raise ValidationError(
                    f"dimension {name!r} has unknown type {kind!r}"
                )
        return cls(dims=dims)


@dataclass(frozen=True)
class SearchRecord:
    draw: int
    params: dict
    status: str
    train_auc: float | None = None
    test_auc: dict = field(default_factory=dict)
    error: str | None = None

    def __post_init__(self):
        if self.status == "ok":
            scores = [self.train_auc] + list(self.test_auc.values())
            if any(s is None or not (0.0 <= s <= 1.0) for s in scores):
                raise ValidationError(f"draw {self.draw}: AUC out of range in ok record")

    def to_dict(self) -> dict:
        doc = {"draw": self.draw, "params": self.params, "status": self.status}
        if self.status == "ok":
            doc["train_auc"] = self.train_auc
            doc["test_auc"] = self.test_auc
        else:
            doc["error"] = self.error
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SearchRecord":
        return cls(
            draw=int(doc["draw"]),
            params=dict(doc["params"]),
            status=doc["status"],
            train_auc=doc.get("train_auc"),
            test_auc=dict(doc.get("test_auc", {})),
            error=doc.get("error"),
        )


Evaluator = Callable[[dict], tuple[AlignedDataset, Mapping[str, AlignedDataset]]]


def random_search(space: ParamSpace, evaluator: Evaluator, n_draws: int,
                  seed: int = 0,
                  quantiles: Sequence[float] = DEFAULT_QUANTILES,
                  encoding: str = "standardized",
                  workers: int = 1,
                  skip: frozenset | set = frozenset(),
                  sink: Callable[[SearchRecord], None] | None = None) -> list:
    """Evaluate n_draws deterministic assignments; failures are recorded,
    never fatal.

    Assignments are keyed by (seed, draw index), so a resumed or reordered
    sweep sees the identical sequence. `sink` receives records in draw order
    as they become available (for streaming to disk); `skip` suppresses
    already-completed draw indices.
    """
    if n_draws < 1:
        raise ValidationError(f"need at least 1 draw, got {n_draws}")

    def run_one(draw: int) -> SearchRecord:
        params = space.sample(seed, draw)
        try:
            train, tests = evaluator(params)
            train_auc = evaluate_dataset(train, quantiles=quantiles,
                                         encoding=encoding).auc
            test_auc = {
                level: evaluate_dataset(ds, quantiles=quantiles, encoding=encoding).auc
                for level, ds in tests.items()
            }
            return SearchRecord(draw=draw, params=params, status="ok",
                                train_auc=train_auc, test_auc=test_auc)
        except Exception as exc:  # noqa: BLE001 - failures become records
            return SearchRecord(draw=draw, params=params, status="failed",
                                error=str(exc))

    draws = [d for d in range(n_draws) if d not in skip]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, draws))
    else:
        records = [run_one(d) for d in draws]
    if sink is not None:
        for rec in records:
            sink(rec)
    return records


def transfer_correlation(records: Sequence[SearchRecord], level: str) -> float:
    """Pearson correlation between train AUC and test AUC at one level."""
    pairs = [
        (r.train_auc, r.test_auc[level])
        for r in records
        if r.status == "ok" and level in r.test_auc
    ]
    if len(pairs) < 3:
        raise ValidationError(
            f"need at least 3 ok records with level {level!r}, got {len(pairs)}"
        )
    train = np.array([p[0] for p in pairs])
    test = np.array([p[1] for p in pairs])
    if train.std() == 0.0 or test.std() == 0.0:
        raise ValidationError("zero variance in a score series")
    return float(np.corrcoef(train, test)[0, 1])


def select_top(records: Sequence[SearchRecord]) -> SearchRecord:
    """The ok record with the highest train AUC; ties go to the lowest draw."""
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        raise ValidationError("no successful records to select from")
    return min(ok, key=lambda r: (-r.train_auc, r.draw))


# ---------------------------------------------------------------------------
# demonstration model family
# ---------------------------------------------------------------------------

DEMO_LEVEL_SEPARATION = {"Low": 1.2, "Medium": 0.9, "High": 0.7}


def _params_entropy(params: dict) -> int:
    digest = hashlib.sha256(json.dumps(params, sort_keys=True).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _rotate(ad: AlignedDataset, rotation_seed: int) -> AlignedDataset:
    rng = keyed_rng(rotation_seed, 7)
    q, _ = np.linalg.qr(rng.standard_normal((ad.p, ad.p)))
    return AlignedDataset(image_ids=ad.image_ids, features=ad.features @ q,
                          labels=ad.labels, variation=ad.variation)


def make_demo_evaluator(family_seed: int = 0, k: int = 7, n_per_class: int = 16,
                        p: int = 16) -> Evaluator:
    """Cluster family whose only performance-relevant knob is `noise`.

    Recognized parameters: noise (within-class spread, required),
    rotation_seed (optional; rotates the feature space, which leaves all
    scores unchanged). Stands in for an expensive model family at desk scale.
    """

    def build(params: dict) -> tuple[AlignedDataset, dict]:
        if "noise" not in params:
            raise ValidationError("demo family requires a 'noise' parameter")
        noise = float(params["noise"])
        if noise < 0 or not math.isfinite(noise):
            raise ValidationError(f"demo family noise must be finite and >= 0, got {noise}")
        entropy = _params_entropy(params)

        def dataset(tag: int, separation: float, variation: Variation) -> AlignedDataset:
            spec = SynthSpec(kind="clusters", k=k, n_per_class=n_per_class, p=p,
                             noise=noise, separation=separation,
                             seed=(family_seed + entropy + tag) % (2 ** 63),
                             variation=variation)
            ad = align(*generate(spec))
            if "rotation_seed" in params:
                ad = _rotate(ad, int(params["rotation_seed"]))
            return ad

        train = dataset(0, 1.0, Variation.UNSPECIFIED)
        tests = {
            name: dataset(i + 1, sep, Variation.parse(name))
            for i, (name, sep) in enumerate(DEMO_LEVEL_SEPARATION.items())
        }
        return train, tests

    return build
