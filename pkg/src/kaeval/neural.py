"""Spike-count normalization: repetition-level counts to a feature matrix.

Per site and block, the mean blank-presentation count is subtracted from
every evoked count, responses are divided by the standard deviation of that
site's responses across the block's images, and the result is averaged over
all repetitions of each (site, image). Low-variation blocks carry several
repetitions of every image; those are split into complete per-repetition
sets and normalized within each set.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from .dataset import FeatureSet, Variation
from .errors import ValidationError

BLANK_IMAGE_ID = "__blank__"
EPSILON_STD = 1e-12


class ZeroVariancePolicy(Enum):
    ERROR = "error"
    EPSILON = "epsilon"
    DROP_SITE = "drop_site"

    @classmethod
    def parse(cls, text: str) -> "ZeroVariancePolicy":
        for member in cls:
            if member.value == str(text):
                return member
        raise ValidationError(
            f"unknown zero-variance policy {text!r}; expected "
            f"{[m.value for m in cls]}"
        )


@dataclass(frozen=True)
class PreprocConfig:
    variation: Variation
    low_splits: int = 3
    zero_variance: ZeroVariancePolicy = ZeroVariancePolicy.ERROR
    window_ms: tuple = (70.0, 170.0)  # informational; counts arrive pre-windowed

    def __post_init__(self):
        if self.low_splits < 1:
            raise ValidationError(f"split count must be >= 1, got {self.low_splits}")


@dataclass(frozen=True)
class RepetitionTable:
    """Long-format spike counts keyed by (site, image, block, repetition)."""

    site_ids: tuple
    image_ids: tuple
    block_ids: tuple
    repetitions: tuple
    counts: tuple
    is_blank: tuple

    def __post_init__(self):
        fields = (self.site_ids, self.image_ids, self.block_ids,
                  self.repetitions, self.counts, self.is_blank)
        lengths = {len(f) for f in fields}
        if len(lengths) != 1:
            raise ValidationError("repetition table columns differ in length")
        object.__setattr__(self, "site_ids", tuple(str(s) for s in self.site_ids))
        object.__setattr__(self, "image_ids", tuple(str(s) for s in self.image_ids))
        object.__setattr__(self, "block_ids", tuple(str(s) for s in self.block_ids))
        object.__setattr__(self, "repetitions", tuple(int(r) for r in self.repetitions))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "is_blank", tuple(bool(b) for b in self.is_blank))
        seen = set()
        for key in zip(self.site_ids, self.image_ids, self.block_ids, self.repetitions):
            if key in seen:
                raise ValidationError(
                    f"duplicate (site, image, block, repetition) key {key!r}"
                )
            seen.add(key)
        for i, c in enumerate(self.counts):
            if c < 0:
                raise ValidationError(f"negative spike count {c} at record {i}")
        # every (site, block) with evoked rows needs at least one blank row
        evoked = set()
        blanks = set()
        for site, block, blank in zip(self.site_ids, self.block_ids, self.is_blank):
            (blanks if blank else evoked).add((site, block))
        missing = sorted(evoked - blanks)
        if missing:
            site, block = missing[0]
            raise ValidationError(
                f"no blank rows for site {site!r} in block {block!r}"
            )

    def __len__(self) -> int:
        return len(self.site_ids)


def load_repetition_table(path: Union[str, Path]) -> RepetitionTable:
    """Read the repetition CSV (site_id,image_id,block_id,repetition,count,is_blank)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"spike file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValidationError(f"empty spike file: {path}")
    expected = ["site_id", "image_id", "block_id", "repetition", "count", "is_blank"]
    if rows[0] != expected:
        missing = [c for c in expected if c not in rows[0]]
        if missing:
            raise ValidationError(f"missing column {missing[0]!r} in {path}")
        raise ValidationError(
            f"malformed header in {path}: expected {expected}, got {rows[0]}"
        )
    sites, images, blocks, reps, counts, blank = [], [], [], [], [], []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != 6:
            raise ValidationError(f"row {i} in {path} has {len(row)} cells, expected 6")
        sites.append(row[0])
        images.append(row[1])
        blocks.append(row[2])
        try:
            reps.append(int(row[3]))
            counts.append(int(row[4]))
            flag = int(row[5])
        except ValueError:
            raise ValidationError(f"non-integer value in row {i} of {path}") from None
        if flag not in (0, 1):
            raise ValidationError(f"is_blank must be 0 or 1, got {row[5]!r} at row {i}")
        blank.append(bool(flag))
    return RepetitionTable(site_ids=tuple(sites), image_ids=tuple(images),
                           block_ids=tuple(blocks), repetitions=tuple(reps),
                           counts=tuple(counts), is_blank=tuple(blank))


def build_neural_features(rt: RepetitionTable, cfg: PreprocConfig) -> FeatureSet:
    """Normalize a repetition table into an images x sites FeatureSet.

    Standard deviations are population (divide by N) over the individual
    background-subtracted responses in the normalization group: (site, block)
    for Medium/High, (site, block, repetition mod low_splits) for Low.
    """
    sites = sorted(set(rt.site_ids))
    images = sorted(set(i for i, b in zip(rt.image_ids, rt.is_blank) if not b))
    if not images:
        raise ValidationError("repetition table has no evoked (non-blank) rows")

    # background level per (site, block)
    blank_sums: dict = {}
    for site, image, block, count, blank in zip(
        rt.site_ids, rt.image_ids, rt.block_ids, rt.counts, rt.is_blank
    ):
        if blank:
            total, m = blank_sums.get((site, block), (0.0, 0))
            blank_sums[(site, block)] = (total + count, m + 1)

    # coverage: every (site, image) observed at least once
    observed = set()
    for site, image, blank in zip(rt.site_ids, rt.image_ids, rt.is_blank):
        if not blank:
            observed.add((site, image))
    for site in sites:
        for image in images:
            if (site, image) not in observed:
                raise ValidationError(
                    f"missing coverage: site {site!r} never observed image {image!r}"
                )

    low = cfg.variation == Variation.LOW

    def group_key(site, block, rep):
        if low:
            return (site, block, rep % cfg.low_splits)
        return (site, block)

    centered: dict = {}  # group key -> list of (image, value)
    for site, image, block, rep, count, blank in zip(
        rt.site_ids, rt.image_ids, rt.block_ids, rt.repetitions, rt.counts, rt.is_blank
    ):
        if blank:
            continue
        total, m = blank_sums[(site, block)]
        value = count - total / m
        centered.setdefault(group_key(site, block, rep), []).append((image, value))

    dropped: set = set()
    sums: dict = {}  # (site, image) -> [total, m]
    for key, rows in centered.items():
        site = key[0]
        values = np.array([v for _, v in rows])
        std = float(values.std())  # population estimator
        if std == 0.0:
            if cfg.zero_variance is ZeroVariancePolicy.ERROR:
                raise ValidationError(
                    f"zero within-block variance for site {site!r} in group {key!r}"
                )
            if cfg.zero_variance is ZeroVariancePolicy.DROP_SITE:
                dropped.add(site)
                continue
            std = EPSILON_STD
        for image, value in rows:
            entry = sums.setdefault((site, image), [0.0, 0])
            entry[0] += value / std
            entry[1] += 1

    if dropped:
        warnings.warn(
            f"dropping {len(dropped)} zero-variance site(s): {sorted(dropped)}",
            RuntimeWarning,
            stacklevel=2,
        )
    kept = [s for s in sites if s not in dropped]
    if not kept:
        raise ValidationError("all sites dropped by zero-variance policy")

    matrix = np.empty((len(images), len(kept)))
    for col, site in enumerate(kept):
        for row, image in enumerate(images):
            total, m = sums[(site, image)]
            matrix[row, col] = total / m
    return FeatureSet(image_ids=tuple(images), features=matrix,
                      variation=cfg.variation)
