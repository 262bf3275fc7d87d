"""Shared numeric primitives."""

from __future__ import annotations

import numpy as np

# Logistic arguments are clipped here before exponentiation; the
# induced error is below 1e-13 while ruling out overflow.
SIGMOID_CLAMP = 30.0


def sigmoid(z):
    """Componentwise logistic 1/(1+exp(-z)) with arguments clamped to
    +/-30. Accepts scalars or arrays; output lies in (0, 1).
    """
    z = np.clip(z, -SIGMOID_CLAMP, SIGMOID_CLAMP)
    return 1.0 / (1.0 + np.exp(-z))
