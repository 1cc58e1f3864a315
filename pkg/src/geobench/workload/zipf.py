"""Zipfian index sampler with an exact precomputed CDF.

P(k) = k^-theta / sum_{j=1..n} j^-theta for k in [1, n]. theta=0 degenerates
to the uniform distribution; theta=1 is the classic harmonic skew. Sampling
is inverse-CDF via binary search, so the empirical pmf matches the analytic
one exactly up to sampling noise.
"""

from __future__ import annotations

import random

import numpy as np

from ..errors import ConfigError

_MAX_DOMAIN = 10**7


class ZipfSampler:
    def __init__(self, n: int, theta: float):
        if n < 1:
            raise ConfigError(f"zipf domain size must be >= 1, got {n}")
        if n > _MAX_DOMAIN:
            raise ConfigError(f"zipf domain size {n} exceeds supported {_MAX_DOMAIN}")
        if not 0.0 <= theta <= 1.0:
            raise ConfigError(f"zipf theta must be in [0, 1], got {theta}")
        self.n = n
        self.theta = theta
        weights = np.arange(1, n + 1, dtype=np.float64) ** (-theta)
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        cdf[-1] = 1.0
        self._cdf = cdf

    def sample(self, rng: random.Random) -> int:
        """One draw in [1, n]."""
        return int(np.searchsorted(self._cdf, rng.random(), side="right")) + 1

    def sample_many(self, rng: random.Random, count: int) -> np.ndarray:
        """Vectorized draws; same distribution, same rng stream."""
        u = np.fromiter(
            (rng.random() for _ in range(count)), dtype=np.float64, count=count
        )
        return np.searchsorted(self._cdf, u, side="right") + 1

    def pmf(self) -> np.ndarray:
        out = np.empty(self.n)
        out[0] = self._cdf[0]
        out[1:] = np.diff(self._cdf)
        return out
