"""Synthetic representations with known kernel-analysis behavior, plus an
independent reference pipeline for equivalence testing.

The reference curve deliberately shares no code with the main pipeline: it
builds distances by broadcasting, eigendecomposes with SciPy's solver, and
projects the labels onto the explicitly formed leading subspace separately
for every dimension, so a bug would have to appear twice to go unnoticed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import FeatureSet, LabelFrame, Variation
from .errors import ValidationError
from .kernel import LabelMatrix
from .rng import keyed_rng

KINDS = ("onehot", "clusters", "noise")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic representation.

    onehot: every image of class j is the j-th basis vector times
    `separation`, so exactly k kernel components carry all label structure.
    clusters: class centroids on a sphere of radius `separation` plus
    isotropic Gaussian noise. noise: features independent of labels.
    """

    kind: str
    k: int = 7
    n_per_class: int = 10
    p: int = 8
    noise: float = 0.0
    separation: float = 1.0
    seed: int = 0
    variation: Variation = Variation.UNSPECIFIED

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown synth kind {self.kind!r}; expected {KINDS}")
        if self.k < 2:
            raise ValidationError(f"need k >= 2 classes, got {self.k}")
        if self.n_per_class < 2:
            raise ValidationError(f"need n_per_class >= 2, got {self.n_per_class}")
        if self.p < 1:
            raise ValidationError(f"need p >= 1, got {self.p}")
        if self.noise < 0:
            raise ValidationError(f"noise must be non-negative, got {self.noise}")
        if self.kind == "onehot" and self.p < self.k:
            raise ValidationError(
                f"onehot needs p >= k, got p={self.p}, k={self.k}"
            )

    @property
    def n(self) -> int:
        return self.k * self.n_per_class


def generate(spec: SynthSpec) -> tuple[FeatureSet, LabelFrame]:
    """Deterministically generate (features, labels) from a spec."""
    n = spec.n
    ids = tuple(f"img_{i:05d}" for i in range(n))
    class_names = [f"c{j:02d}" for j in range(spec.k)]
    labels = tuple(class_names[i // spec.n_per_class] for i in range(n))
    rng = keyed_rng(spec.seed)
    if spec.kind == "onehot":
        X = np.zeros((n, spec.p))
        for i in range(n):
            X[i, i // spec.n_per_class] = spec.separation
    elif spec.kind == "clusters":
        centroids = rng.standard_normal((spec.k, spec.p))
        centroids *= spec.separation / np.linalg.norm(centroids, axis=1, keepdims=True)
        X = centroids[np.arange(n) // spec.n_per_class]
        X = X + spec.noise * rng.standard_normal((n, spec.p))
    else:
        X = rng.standard_normal((n, spec.p))
    fs = FeatureSet(image_ids=ids, features=X, variation=spec.variation)
    lf = LabelFrame(image_ids=ids, classes=labels)
    return fs, lf


def oracle_curve(fs: FeatureSet, labels: LabelMatrix, sigma: float) -> np.ndarray:
    """Reference loss curve for one bandwidth by naive dense projection.

    For each dimension d the leading eigenvector block is formed explicitly
    and the regression is solved from scratch; no incremental shortcuts.
    Quadratic-in-d cost, so restricted to n <= 500.
    """
    X = np.asarray(fs.features, dtype=np.float64)
    n = X.shape[0]
    if n > 500:
        raise ValidationError(f"reference pipeline limited to n <= 500, got {n}")
    if labels.n != n:
        raise ValidationError(f"{n} images but {labels.n} label rows")
    if sigma <= 0:
        raise ValidationError(f"bandwidth must be positive, got {sigma}")
    diff = X[:, None, :] - X[None, :, :]
    sq = (diff * diff).sum(axis=2)
    K = np.exp(-sq / (2.0 * sigma * sigma))
    _, U = scipy.linalg.eigh(K)
    U = U[:, ::-1]
    Y = labels.values
    k = Y.shape[1]
    losses = np.empty(n + 1)
    losses[0] = float((Y * Y).sum()) / (n * k)
    for d in range(1, n + 1):
        block = U[:, :d]
        predicted = block @ (block.T @ Y)
        resid = predicted - Y
        losses[d] = float((resid * resid).sum()) / (n * k)
    return losses


def oracle_min_curve(fs: FeatureSet, labels: LabelMatrix,
                     sigmas) -> np.ndarray:
    """Pointwise minimum of reference curves over a bandwidth list."""
    stack = np.stack([oracle_curve(fs, labels, s) for s in sigmas])
    return stack.min(axis=0)
