"""Seeded synthetic review generator for experiments and self-checks.

Reviews are random character strings drawn from three pools. A
positive-leaning review samples mostly neutral characters with an
excess of positive ones, a negative-leaning review mirrors that, and
the label records which evidence pool actually won in the sampled text,
so the mapping from text to label is exact and learnable.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, Review
from .errors import ConfigError
from .rng import substream

POSITIVE_POOL = tuple("好棒佳优美乐喜爱赞妙欣悦良善誉馨快旺兴福")
NEGATIVE_POOL = tuple("坏差劣糟怒哀恨厌恶弊愁忧苦悲祸臭烂败衰危")
NEUTRAL_POOL = tuple("的一是在不了有和人这中大为上个国我以要他时来用们生到作地于出就分对成会可主发年动")

MIN_LENGTH = 10
MAX_LENGTH = 60
_EVIDENCE_RATE = 0.30  # favored pool
_COUNTER_RATE = 0.10  # opposing pool


def _pool_weights(favored: tuple, opposing: tuple) -> tuple[list, np.ndarray]:
    chars = list(favored) + list(opposing) + list(NEUTRAL_POOL)
    neutral_rate = 1.0 - _EVIDENCE_RATE - _COUNTER_RATE
    weights = np.concatenate(
        [
            np.full(len(favored), _EVIDENCE_RATE / len(favored)),
            np.full(len(opposing), _COUNTER_RATE / len(opposing)),
            np.full(len(NEUTRAL_POOL), neutral_rate / len(NEUTRAL_POOL)),
        ]
    )
    return chars, weights / weights.sum()


def generate_corpus(n: int, seed: int, name: str = "synthetic") -> Corpus:
    """n seeded reviews, alternating positive and negative leaning.

    The label is 1 exactly when the sampled text contains strictly more
    positive-pool than negative-pool characters, so roughly 5% of
    reviews end up labeled against their leaning and the class balance
    stays near even.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = substream(seed, "synthetic")
    pos_chars, pos_weights = _pool_weights(POSITIVE_POOL, NEGATIVE_POOL)
    neg_chars, neg_weights = _pool_weights(NEGATIVE_POOL, POSITIVE_POOL)
    positive_set = set(POSITIVE_POOL)
    negative_set = set(NEGATIVE_POOL)

    reviews = []
    for index in range(n):
        if index % 2 == 0:
            chars, weights = pos_chars, pos_weights
        else:
            chars, weights = neg_chars, neg_weights
        length = int(rng.integers(MIN_LENGTH, MAX_LENGTH + 1))
        drawn = rng.choice(len(chars), size=length, p=weights)
        text = "".join(chars[i] for i in drawn)
        pos_count = sum(1 for ch in text if ch in positive_set)
        neg_count = sum(1 for ch in text if ch in negative_set)
        reviews.append(Review(text=text, label=1 if pos_count > neg_count else 0))
    return Corpus(reviews=reviews, name=name)
