"""Mask comparison scores."""

from typing import NamedTuple

import numpy as np

from .errors import InvalidParameterError


class Metrics(NamedTuple):
    accuracy: float
    dice: float


def binarize(m, level=0.5):
    return np.asarray(m, dtype=float) > level


def compare_masks(pred, truth):
    """Pixel accuracy and dice of two boolean masks. Two empty masks have dice 1."""
    a = np.asarray(pred, dtype=bool)
    b = np.asarray(truth, dtype=bool)
    if a.shape != b.shape:
        raise InvalidParameterError(f"mask shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise InvalidParameterError("masks are empty arrays")
    acc = np.count_nonzero(a == b) / a.size
    den = np.count_nonzero(a) + np.count_nonzero(b)
    dice = 1.0 if den == 0 else 2.0 * np.count_nonzero(a & b) / den
    return Metrics(float(acc), float(dice))
