"""Named random substreams derived from a single pipeline seed.

Every stochastic stage (corpus split, weight init, epoch shuffling,
dropout, negative sampling, ...) pulls its own generator keyed by a
stage name, so changing how one stage consumes randomness can never
reorder the draws of another.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import ConfigError


def substream(seed: int, stage: str) -> np.random.Generator:
    """Return a Generator for `stage`, deterministic in (seed, stage)."""
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    key = zlib.crc32(stage.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed, key]))
