"""Deterministic random number generation.

All randomness in the package flows through one counter-based generator
(Philox) keyed by an integer seed plus a tuple of stream components, so that
every subset draw, column subsample, and search assignment is reproducible
from the top-level seed alone and independent of evaluation order.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by (seed, *key).

    Streams with distinct keys are statistically independent; the same
    (seed, key) always yields the same sequence.
    """
    seed = int(seed)
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    parts = tuple(int(k) for k in key)
    if any(k < 0 for k in parts):
        raise ValidationError(f"rng key components must be non-negative, got {parts}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=parts)
    return np.random.Generator(np.random.Philox(ss))
