"""Per-run random streams for batched simulation.

Every run owns a generator seeded from ``(seed, tag)`` so that its draws do
not depend on which other runs share the batch.  Uniforms are fetched in
blocks to keep the per-stage cost independent of the number of generators.
"""

from __future__ import annotations

import numpy as np

SIM_TAG = 0
P1_TAG = 1
P2_TAG = 2
PROBE_TAG = 3


def make_generator(seed: int, tag: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tag), *map(int, extra)]))


class UniformStreams:
    """Uniform draws for R independent runs, consumed in lockstep."""

    def __init__(self, seeds, tag: int, *extra: int, block: int = 1024):
        self.seeds = [int(s) for s in seeds]
        self._gens = [make_generator(s, tag, *extra) for s in self.seeds]
        self._block = block
        self._buf = np.empty((len(self._gens), 0))
        self._pos = 0

    @property
    def n_runs(self) -> int:
        return len(self._gens)

    def draw(self, k: int = 1) -> np.ndarray:
        """Next ``k`` uniforms of every run, shape (R, k)."""
        if self._pos + k > self._buf.shape[1]:
            rest = self._buf[:, self._pos:]
            size = max(self._block, k)
            fresh = np.stack([g.random(size) for g in self._gens]) if self._gens else np.empty((0, size))
            self._buf = np.concatenate([rest, fresh], axis=1)
            self._pos = 0
        out = self._buf[:, self._pos:self._pos + k]
        self._pos += k
        return out

    def generator(self, r: int) -> np.random.Generator:
        return self._gens[r]


def sample_rows(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling of one index per row of ``probs`` (R, n)."""
    cdf = np.cumsum(probs, axis=1)
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)
