"""Kernel-analysis core: distances, bandwidths, eigenbasis, loss curves, AUC.

The pipeline scores a representation by how much of a one-vs-all labelling
the leading kernel principal components explain. For each candidate
bandwidth the Gaussian kernel matrix is eigendecomposed, the label matrix is
regressed onto the leading d eigenvectors for every d, and the class-averaged
squared loss is recorded; the final curve takes the pointwise minimum over
bandwidths, and the score is the area under accuracy = 1 - loss plotted
against normalized dimension d / D.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .dataset import AlignedDataset, FeatureSet
from .errors import ValidationError

DEFAULT_QUANTILES = (0.10, 0.50, 0.90)

#: Label encodings for the one-vs-all label matrix. 'standardized' scales each
#: indicator column to zero mean and unit variance, which puts the loss of an
#: uninformative representation at exactly 1 at d=0 and makes its accuracy
#: curve track d/D (chance AUC 0.5). 'signed' (+1/-1) and 'binary' (1/0) are
#: the raw encodings; with more than two classes their class-imbalanced column
#: means inflate the chance floor (roughly 0.75 and 1 - 1/(2k) respectively).
ENCODINGS = ("standardized", "signed", "binary")


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.flags.writeable:
        out = out.copy()
        out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric matrix of squared Euclidean distances with zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"distance matrix must be square, got {v.shape}")
        if np.any(np.diagonal(v) != 0.0):
            raise ValidationError("distance matrix diagonal must be exactly zero")
        if np.any(v < 0.0):
            raise ValidationError("distance matrix has negative entries")
        if not np.array_equal(v, v.T):
            raise ValidationError("distance matrix is not symmetric")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def offdiag_distances(self) -> np.ndarray:
        """Euclidean (not squared) distances over unordered pairs i < j."""
        iu = np.triu_indices(self.n, k=1)
        return np.sqrt(self.values[iu])


def pairwise_sq_distances(fs: Union[FeatureSet, AlignedDataset, np.ndarray]) -> DistanceMatrix:
    """Squared Euclidean distances between all image pairs.

    Each pair is computed once and mirrored, so the result is exactly
    symmetric and non-negative.
    """
    X = fs if isinstance(fs, np.ndarray) else fs.features
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValidationError(f"need an n x p matrix with n >= 2, got shape {X.shape}")
    return DistanceMatrix(squareform(pdist(X, "sqeuclidean")))


@dataclass(frozen=True)
class SigmaCandidates:
    """Candidate Gaussian bandwidths with the quantile each was drawn at."""

    sigmas: tuple
    quantiles: tuple

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "quantiles", tuple(float(q) for q in self.quantiles))
        if len(self.sigmas) != len(self.quantiles):
            raise ValidationError("sigma and quantile lists differ in length")
        if any(s <= 0 for s in self.sigmas):
            raise ValidationError("bandwidths must be strictly positive")
        qs = list(self.quantiles)
        if qs != sorted(qs):
            raise ValidationError("quantiles must be sorted ascending")
        for a, b in zip(self.sigmas, self.sigmas[1:]):
            if b < a:
                raise ValidationError(
                    "bandwidths must be non-decreasing with quantile; "
                    "distance distribution too degenerate"
                )


def sigma_candidates(dm: DistanceMatrix,
                     quantiles: Sequence[float] = DEFAULT_QUANTILES) -> SigmaCandidates:
    """Bandwidths at the given quantiles of the pairwise distance distribution.

    Quantiles use linear interpolation over the multiset of Euclidean
    distances for pairs i < j. A quantile that lands on zero (duplicate
    points) is replaced by the smallest positive distance.
    """
    qs = sorted(float(q) for q in quantiles)
    if not qs:
        raise ValidationError("need at least one quantile")
    if any(not (0.0 < q < 1.0) for q in qs):
        raise ValidationError(f"quantiles must lie in (0, 1), got {qs}")
    dist = dm.offdiag_distances()
    positive = dist[dist > 0]
    if positive.size == 0:
        raise ValidationError(
            "constant representation: all pairwise distances are zero"
        )
    raw = np.quantile(dist, qs)
    smallest_positive = float(positive.min())
    sigmas = tuple(smallest_positive if s == 0.0 else float(s) for s in raw)
    return SigmaCandidates(sigmas=sigmas, quantiles=tuple(qs))


@dataclass(frozen=True)
class KernelMatrix:
    """Gaussian kernel matrix with unit diagonal, plus the bandwidth used."""

    values: np.ndarray
    sigma: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"kernel matrix must be square, got {v.shape}")
        if np.any(np.diagonal(v) != 1.0):
            raise ValidationError("kernel diagonal must be exactly 1")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValidationError("kernel entries must lie in [0, 1]")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n(self) -> int:
        return self.values.shape[0]


def gaussian_kernel(dm: DistanceMatrix, sigma: float) -> KernelMatrix:
    """exp(-dist^2 / (2 sigma^2)) entrywise, diagonal pinned to exactly 1."""
    sigma = float(sigma)
    if sigma <= 0:
        raise ValidationError(f"bandwidth must be positive, got {sigma}")
    K = np.exp(-dm.values / (2.0 * sigma * sigma))
    np.fill_diagonal(K, 1.0)
    return KernelMatrix(values=K, sigma=sigma)


@dataclass(frozen=True)
class EigenBasis:
    """Full orthonormal eigenbasis sorted by descending eigenvalue.

    Signs follow a first-nonzero-component-positive convention so repeated
    runs produce identical bases. Eigenvalues are reported clamped at zero;
    the loss computation uses only the eigenvectors, so truncated eigenvalue
    blocks are stored for completeness but never consumed downstream.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.eigenvalues, dtype=np.float64)
        U = np.asarray(self.eigenvectors, dtype=np.float64)
        if U.ndim != 2 or U.shape[0] != U.shape[1] or w.shape != (U.shape[0],):
            raise ValidationError("eigenbasis shape mismatch")
        if np.any(np.diff(w) > 0):
            raise ValidationError("eigenvalues must be sorted descending")
        object.__setattr__(self, "eigenvalues", _readonly(w))
        object.__setattr__(self, "eigenvectors", _readonly(U))

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    def leading_vectors(self, d: int) -> np.ndarray:
        return self.eigenvectors[:, :d]

    def leading_values(self, d: int) -> np.ndarray:
        return self.eigenvalues[:d]

    def orthonormality_error(self) -> float:
        U = self.eigenvectors
        return float(np.abs(U.T @ U - np.eye(self.n)).max())

    def reconstruction_error(self, km: KernelMatrix) -> float:
        U, w = self.eigenvectors, self.eigenvalues
        return float(np.abs((U * w) @ U.T - km.values).max())


def _fix_signs(U: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so the first component larger than tol is positive."""
    first = (np.abs(U) > tol).argmax(axis=0)
    lead = U[first, np.arange(U.shape[1])]
    return U * np.where(lead < 0, -1.0, 1.0)


def center_kernel(km: KernelMatrix) -> np.ndarray:
    """Double-centered kernel H K H (optional, off by default downstream)."""
    K = km.values
    row = K.mean(axis=0, keepdims=True)
    return K - row - row.T + K.mean()


def eigendecompose(km: KernelMatrix, center: bool = False) -> EigenBasis:
    """Full symmetric eigendecomposition, descending, deterministic signs.

    Eigenvalues more negative than -1e-8 * lambda_max indicate numerical
    asymmetry and trigger a warning; all negative values are clamped to zero
    for reporting while their eigenvectors are retained.
    """
    K = center_kernel(km) if center else km.values
    w, U = np.linalg.eigh(K)
    w = w[::-1].copy()
    U = U[:, ::-1]
    lam1 = max(float(w[0]), 0.0)
    threshold = -1e-8 * lam1 if lam1 > 0 else -1e-12
    if np.any(w < threshold):
        warnings.warn(
            f"kernel eigendecomposition produced eigenvalue {w.min():.3e} below "
            f"-1e-8 * lambda_1; clamping to zero",
            RuntimeWarning,
            stacklevel=2,
        )
    np.maximum(w, 0.0, out=w)
    return EigenBasis(eigenvalues=w, eigenvectors=_fix_signs(U))


@dataclass(frozen=True)
class LabelMatrix:
    """One-vs-all label matrix; columns ordered by sorted class name."""

    values: np.ndarray
    encoding: str
    classes: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != len(self.classes):
            raise ValidationError("label matrix shape mismatch")
        if self.encoding not in ENCODINGS:
            raise ValidationError(
                f"unknown encoding {self.encoding!r}; expected one of {ENCODINGS}"
            )
        if np.any((v > 0).sum(axis=1) != 1):
            raise ValidationError("each row must have exactly one positive entry")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def column_of(self, cls: str) -> int:
        return self.classes.index(cls)


def encode_labels(ad: AlignedDataset, encoding: str = "standardized") -> LabelMatrix:
    """Build the one-vs-all label matrix for an aligned dataset."""
    if encoding not in ENCODINGS:
        raise ValidationError(
            f"unknown encoding {encoding!r}; expected one of {ENCODINGS}"
        )
    n, k = ad.n, ad.k
    indicator = np.zeros((n, k))
    col = {c: j for j, c in enumerate(ad.classes)}
    for i, cls in enumerate(ad.labels):
        indicator[i, col[cls]] = 1.0
    if encoding == "binary":
        values = indicator
    elif encoding == "signed":
        values = 2.0 * indicator - 1.0
    else:
        frac = indicator.mean(axis=0)
        values = (indicator - frac) / np.sqrt(frac * (1.0 - frac))
    return LabelMatrix(values=values, encoding=encoding, classes=ad.classes)


def loss_curve_for_sigma(basis: EigenBasis, labels: LabelMatrix) -> np.ndarray:
    """Class-averaged squared loss at every dimension d = 0..D for one basis.

    Runs incrementally: keep the residual R = Y, subtract the rank-one
    component along each successive eigenvector, and record the mean column
    loss after each step. Total cost O(n^2 k); index 0 is the loss of the
    zero predictor.
    """
    U = basis.eigenvectors
    Y = labels.values
    n = U.shape[0]
    if Y.shape[0] != n:
        raise ValidationError(
            f"eigenbasis over {n} images but labels over {Y.shape[0]}"
        )
    k = Y.shape[1]
    coeffs = U.T @ Y
    residual = Y.copy()
    losses = np.empty(n + 1)
    losses[0] = float(np.einsum("ij,ij->", residual, residual)) / (n * k)
    for d in range(n):
        residual -= np.outer(U[:, d], coeffs[d])
        losses[d + 1] = float(np.einsum("ij,ij->", residual, residual)) / (n * k)
    return losses


@dataclass(frozen=True)
class KACurve:
    """Per-bandwidth loss curves and their pointwise minimum over bandwidths."""

    loss: np.ndarray
    per_sigma: np.ndarray
    sigmas: tuple
    quantiles: tuple
    argmin_sigma: np.ndarray
    center: bool = False

    def __post_init__(self):
        loss = np.asarray(self.loss, dtype=np.float64)
        per = np.asarray(self.per_sigma, dtype=np.float64)
        if per.shape != (len(self.sigmas), loss.shape[0]):
            raise ValidationError("per-sigma curve block shape mismatch")
        if np.any(loss < -1e-9) or np.any(loss > 1.0 + 1e-9):
            raise ValidationError(
                f"loss values outside [0, 1]: min {loss.min()}, max {loss.max()}"
            )
        object.__setattr__(self, "loss", _readonly(loss))
        object.__setattr__(self, "per_sigma", _readonly(per))
        object.__setattr__(self, "argmin_sigma", _readonly(self.argmin_sigma))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "quantiles", tuple(float(q) for q in self.quantiles))

    @property
    def total_dims(self) -> int:
        """D: the size of the full eigenbasis (= number of images)."""
        return self.loss.shape[0] - 1

    @property
    def accuracy(self) -> np.ndarray:
        return 1.0 - self.loss

    @property
    def complexity(self) -> np.ndarray:
        """Normalized dimension grid d / D, d = 0..D."""
        D = self.total_dims
        return np.arange(D + 1) / D


def ka_curve(fs: Union[FeatureSet, AlignedDataset, np.ndarray], labels: LabelMatrix,
             quantiles: Sequence[float] = DEFAULT_QUANTILES,
             center: bool = False) -> KACurve:
    """Full curve pipeline: distances -> bandwidths -> per-sigma loss -> min.

    Ties in the per-dimension minimum resolve to the smallest bandwidth.
    """
    dm = pairwise_sq_distances(fs)
    if dm.n != labels.n:
        raise ValidationError(f"{dm.n} images but {labels.n} label rows")
    cands = sigma_candidates(dm, quantiles)
    per = np.stack([
        loss_curve_for_sigma(eigendecompose(gaussian_kernel(dm, s), center=center), labels)
        for s in cands.sigmas
    ])
    idx = per.argmin(axis=0)  # first index wins: sigmas ascend, smallest breaks ties
    return KACurve(
        loss=per.min(axis=0),
        per_sigma=per,
        sigmas=cands.sigmas,
        quantiles=cands.quantiles,
        argmin_sigma=np.asarray(cands.sigmas)[idx],
        center=center,
    )


def ka_auc(curve: KACurve) -> float:
    """Trapezoidal area under accuracy vs d / D on the full integer grid."""
    acc = curve.accuracy
    auc = float(np.trapezoid(acc)) / curve.total_dims
    return min(max(auc, 0.0), 1.0)


@dataclass(frozen=True)
class KAResult:
    """A scored curve plus the provenance needed to reproduce it."""

    auc: float
    curve: KACurve
    encoding: str
    n: int
    k: int
    subset_id: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.auc <= 1.0):
            raise ValidationError(f"AUC out of range: {self.auc}")

    @property
    def sigmas(self) -> tuple:
        return self.curve.sigmas


def evaluate_dataset(ad: AlignedDataset,
                     quantiles: Sequence[float] = DEFAULT_QUANTILES,
                     encoding: str = "standardized",
                     center: bool = False,
                     subset_id: int | None = None) -> KAResult:
    """Score one aligned dataset end to end."""
    labels = encode_labels(ad, encoding)
    curve = ka_curve(ad, labels, quantiles=quantiles, center=center)
    return KAResult(
        auc=ka_auc(curve),
        curve=curve,
        encoding=encoding,
        n=ad.n,
        k=ad.k,
        subset_id=subset_id,
    )
