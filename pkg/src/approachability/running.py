"""Compensated running sums."""

from __future__ import annotations

import numpy as np


class KahanSum:
    """Kahan-compensated sum of arrays of a fixed shape."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self._comp = np.zeros(shape)
        self.count = 0

    def add(self, values) -> None:
        y = values - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t
        self.count += 1

    def mean(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros_like(self.total)
        return self.total / self.count
