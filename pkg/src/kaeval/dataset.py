"""Data model and file formats for feature matrices, labels, and manifests.

Two on-disk feature formats are supported: CSV (inspectable) and raw
little-endian row-major float64 with a JSON sidecar (fast). Loading rejects
non-finite values outright; kernel distances would propagate them invisibly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ValidationError


class Variation(Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    UNSPECIFIED = "Unspecified"

    @classmethod
    def parse(cls, text: str) -> "Variation":
        for member in cls:
            if member.value.lower() == str(text).lower():
                return member
        raise ValidationError(
            f"unknown variation level {text!r}; expected one of "
            f"{[m.value for m in cls]}"
        )


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FeatureSet:
    """An n x p matrix of features with one row per image.

    Immutable after construction; the array is a read-only copy.
    """

    image_ids: tuple
    features: np.ndarray
    variation: Variation = Variation.UNSPECIFIED

    def __post_init__(self):
        object.__setattr__(self, "image_ids", tuple(str(i) for i in self.image_ids))
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {feats.shape}")
        object.__setattr__(self, "features", _readonly(feats))
        n, p = feats.shape
        if n < 2:
            raise ValidationError(f"need at least 2 images, got {n}")
        if p < 1:
            raise ValidationError("need at least 1 feature column")
        if len(self.image_ids) != n:
            raise ValidationError(
                f"{len(self.image_ids)} image ids for {n} feature rows"
            )
        if len(set(self.image_ids)) != n:
            seen, dup = set(), None
            for i in self.image_ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise ValidationError(f"duplicate image id {dup!r}")
        bad = np.argwhere(~np.isfinite(feats))
        if bad.size:
            r, c = bad[0]
            raise ValidationError(
                f"non-finite feature value at row {r} (id {self.image_ids[r]!r}), column {c}"
            )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class LabelFrame:
    """Per-image category labels over a finite set of >= 2 classes."""

    image_ids: tuple
    classes: tuple

    def __post_init__(self):
        object.__setattr__(self, "image_ids", tuple(str(i) for i in self.image_ids))
        object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))
        if len(self.image_ids) != len(self.classes):
            raise ValidationError(
                f"{len(self.image_ids)} ids but {len(self.classes)} class labels"
            )
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ValidationError("duplicate image ids in label frame")
        counts: dict = {}
        for c in self.classes:
            counts[c] = counts.get(c, 0) + 1
        if len(counts) < 2:
            raise ValidationError(f"need at least 2 classes, got {len(counts)}")
        small = [c for c, k in counts.items() if k < 2]
        if small:
            raise ValidationError(f"class {small[0]!r} has fewer than 2 members")

    def class_of(self) -> dict:
        return dict(zip(self.image_ids, self.classes))


@dataclass(frozen=True)
class AlignedDataset:
    """Features and labels co-indexed in feature-set row order."""

    image_ids: tuple
    features: np.ndarray
    labels: tuple
    variation: Variation = Variation.UNSPECIFIED
    classes: tuple = field(init=False)
    class_counts: dict = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "image_ids", tuple(self.image_ids))
        object.__setattr__(self, "labels", tuple(str(c) for c in self.labels))
        object.__setattr__(self, "features", _readonly(self.features))
        if len(self.labels) != self.features.shape[0]:
            raise ValidationError("labels and feature rows differ in length")
        counts: dict = {}
        for c in self.labels:
            counts[c] = counts.get(c, 0) + 1
        object.__setattr__(self, "classes", tuple(sorted(counts)))
        object.__setattr__(self, "class_counts", counts)
        if len(self.classes) < 2:
            raise ValidationError(f"need at least 2 classes, got {len(self.classes)}")
        small = [c for c in self.classes if counts[c] < 2]
        if small:
            raise ValidationError(f"class {small[0]!r} has fewer than 2 members")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def k(self) -> int:
        return len(self.classes)

    def subset(self, indices: Sequence[int]) -> "AlignedDataset":
        """Row-restricted copy (image subset)."""
        idx = np.asarray(indices, dtype=np.intp)
        return AlignedDataset(
            image_ids=tuple(self.image_ids[i] for i in idx),
            features=self.features[idx],
            labels=tuple(self.labels[i] for i in idx),
            variation=self.variation,
        )

    def select_sites(self, columns: Sequence[int]) -> "AlignedDataset":
        """Column-restricted copy (feature/site subset)."""
        cols = np.asarray(columns, dtype=np.intp)
        return AlignedDataset(
            image_ids=self.image_ids,
            features=self.features[:, cols],
            labels=self.labels,
            variation=self.variation,
        )


def align(fs: FeatureSet, lf: LabelFrame) -> AlignedDataset:
    """Pair features with labels, re-ordering labels to feature row order."""
    mapping = lf.class_of()
    labels = []
    for image_id in fs.image_ids:
        if image_id not in mapping:
            raise ValidationError(f"no label for image id {image_id!r}")
        labels.append(mapping[image_id])
    return AlignedDataset(
        image_ids=fs.image_ids,
        features=fs.features,
        labels=tuple(labels),
        variation=fs.variation,
    )


# ---------------------------------------------------------------------------
# feature files
# ---------------------------------------------------------------------------

def _parse_cell(cell: str, row: int, col_name: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ValidationError(
            f"non-numeric value {cell!r} at row {row}, column {col_name}"
        ) from None
    if not math.isfinite(value):
        raise ValidationError(
            f"non-finite value {cell!r} at row {row}, column {col_name}"
        )
    return value


def load_feature_csv(path: Union[str, Path],
                     variation: Variation = Variation.UNSPECIFIED) -> FeatureSet:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"feature file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValidationError(f"empty feature file: {path}")
    header = rows[0]
    if not header or header[0] != "image_id" or len(header) < 2:
        raise ValidationError(
            f"malformed header in {path}: expected 'image_id,f0,...', got {header!r}"
        )
    p = len(header) - 1
    ids, data = [], []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != p + 1:
            raise ValidationError(
                f"row {i} in {path} has {len(row)} cells, expected {p + 1}"
            )
        ids.append(row[0])
        data.append([_parse_cell(cell, i, header[j + 1]) for j, cell in enumerate(row[1:])])
    return FeatureSet(image_ids=tuple(ids), features=np.array(data), variation=variation)


def save_feature_csv(fs: FeatureSet, path: Union[str, Path],
                     config: dict | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if config is not None:
            fh.write("# " + json.dumps(config) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id"] + [f"f{j}" for j in range(fs.p)])
        for image_id, row in zip(fs.image_ids, fs.features):
            writer.writerow([image_id] + [repr(float(v)) for v in row])


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def load_feature_binary(path: Union[str, Path],
                        variation: Variation = Variation.UNSPECIFIED) -> FeatureSet:
    path = Path(path)
    sidecar = _sidecar_path(path)
    if not path.exists():
        raise ValidationError(f"feature file not found: {path}")
    if not sidecar.exists():
        raise ValidationError(f"sidecar not found: {sidecar}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed sidecar {sidecar}: {exc}") from None
    for key in ("rows", "cols", "dtype", "order", "ids"):
        if key not in meta:
            raise ValidationError(f"sidecar {sidecar} missing key {key!r}")
    if meta["dtype"] != "f64" or meta["order"] != "row-major":
        raise ValidationError(
            f"sidecar {sidecar} declares unsupported layout "
            f"dtype={meta['dtype']!r} order={meta['order']!r}"
        )
    rows, cols = int(meta["rows"]), int(meta["cols"])
    raw = path.read_bytes()
    expected = rows * cols * 8
    if len(raw) != expected:
        if cols > 0 and len(raw) % (cols * 8) == 0:
            raise ValidationError(
                f"row-count mismatch: sidecar declares rows={rows}, "
                f"raw file holds {len(raw) // (cols * 8)} rows of data"
            )
        raise ValidationError(
            f"size mismatch: expected {expected} bytes for {rows}x{cols} f64, "
            f"file holds {len(raw)}"
        )
    if len(meta["ids"]) != rows:
        raise ValidationError(
            f"sidecar declares rows={rows} but lists {len(meta['ids'])} ids"
        )
    feats = np.frombuffer(raw, dtype="<f8").reshape(rows, cols)
    bad = np.argwhere(~np.isfinite(feats))
    if bad.size:
        r, c = bad[0]
        raise ValidationError(f"non-finite value at row {r}, column {c} in {path}")
    return FeatureSet(image_ids=tuple(meta["ids"]), features=feats, variation=variation)


def save_feature_binary(fs: FeatureSet, path: Union[str, Path],
                        config: dict | None = None) -> None:
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(fs.features, dtype="<f8").tobytes())
    meta = {
        "rows": fs.n,
        "cols": fs.p,
        "dtype": "f64",
        "order": "row-major",
        "ids": list(fs.image_ids),
    }
    if config is not None:
        meta["config"] = config
    _sidecar_path(path).write_text(json.dumps(meta), encoding="utf-8")


def load_feature_matrix(path: Union[str, Path], fmt: str = "auto",
                        variation: Variation = Variation.UNSPECIFIED) -> FeatureSet:
    """Load a feature matrix in either supported format.

    fmt='auto' picks by extension: '.f64' binary, everything else CSV.
    """
    path = Path(path)
    if fmt == "auto":
        fmt = "binary" if path.suffix == ".f64" else "csv"
    if fmt == "csv":
        return load_feature_csv(path, variation)
    if fmt == "binary":
        return load_feature_binary(path, variation)
    raise ValidationError(f"unknown feature format {fmt!r}")


def save_feature_matrix(fs: FeatureSet, path: Union[str, Path], fmt: str = "auto",
                        config: dict | None = None) -> None:
    path = Path(path)
    if fmt == "auto":
        fmt = "binary" if path.suffix == ".f64" else "csv"
    if fmt == "csv":
        save_feature_csv(fs, path, config)
    elif fmt == "binary":
        save_feature_binary(fs, path, config)
    else:
        raise ValidationError(f"unknown feature format {fmt!r}")


# ---------------------------------------------------------------------------
# label files
# ---------------------------------------------------------------------------

def load_labels(path: Union[str, Path]) -> LabelFrame:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"label file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValidationError(f"empty label file: {path}")
    if rows[0][:2] != ["image_id", "class"]:
        raise ValidationError(
            f"malformed header in {path}: expected 'image_id,class', got {rows[0]!r}"
        )
    ids, classes = [], []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != 2:
            raise ValidationError(f"row {i} in {path} has {len(row)} cells, expected 2")
        ids.append(row[0])
        classes.append(row[1])
    return LabelFrame(image_ids=tuple(ids), classes=tuple(classes))


def save_labels(lf: LabelFrame, path: Union[str, Path],
                config: dict | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if config is not None:
            fh.write("# " + json.dumps(config) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "class"])
        for image_id, cls in zip(lf.image_ids, lf.classes):
            writer.writerow([image_id, cls])


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    level: Variation
    path: Path
    fmt: str = "auto"


@dataclass(frozen=True)
class DatasetManifest:
    """Index of per-level feature files plus one shared label file."""

    name: str
    label_path: Path
    entries: tuple
    seed: int | None = None

    def __post_init__(self):
        levels = [e.level for e in self.entries]
        if len(set(levels)) != len(levels):
            raise ValidationError("duplicate variation levels in manifest")
        if not self.entries:
            raise ValidationError("manifest has no entries")


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed manifest {path}: {exc}") from None
    for key in ("labels", "entries"):
        if key not in doc:
            raise ValidationError(f"manifest {path} missing key {key!r}")
    base = path.parent
    label_path = base / doc["labels"]
    if not label_path.exists():
        raise ValidationError(f"label file not found: {label_path}")
    entries = []
    for ent in doc["entries"]:
        fpath = base / ent["path"]
        if not fpath.exists():
            raise ValidationError(f"feature file not found: {fpath}")
        entries.append(ManifestEntry(
            level=Variation.parse(ent["level"]),
            path=fpath,
            fmt=ent.get("format", "auto"),
        ))
    return DatasetManifest(
        name=doc.get("name", path.stem),
        label_path=label_path,
        entries=tuple(entries),
        seed=doc.get("seed"),
    )


def save_manifest(manifest_path: Union[str, Path], name: str, label_file: str,
                  entries: Iterable[dict], seed: int | None = None,
                  config: dict | None = None) -> None:
    """Write a manifest; paths in entries are relative to the manifest."""
    doc: dict = {"name": name, "labels": label_file, "entries": list(entries)}
    if seed is not None:
        doc["seed"] = seed
    if config is not None:
        doc["config"] = config
    Path(manifest_path).write_text(json.dumps(doc, indent=2), encoding="utf-8")
