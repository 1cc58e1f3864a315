"""Log-bucketed latency histogram, 1 us to 1000 s, <=1% bucket width.

Nearest-rank percentiles report the upper bound of the selected bucket,
bounding the relative error by the bucket growth factor.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError

MIN_NS = 1_000  # 1 us
MAX_NS = 1_000_000_000_000  # 1000 s
GROWTH = 1.01
_LOG_GROWTH = math.log(GROWTH)
# bucket 0 covers [0, MIN_NS]; bucket i covers (bound[i-1], bound[i]]
N_BUCKETS = int(math.ceil(math.log(MAX_NS / MIN_NS) / _LOG_GROWTH)) + 2
_BOUNDS = np.minimum(MIN_NS * GROWTH ** np.arange(N_BUCKETS, dtype=np.float64), MAX_NS)


class LatencyHistogram:
    __slots__ = ("counts", "total")

    def __init__(self):
        self.counts = np.zeros(N_BUCKETS, dtype=np.int64)
        self.total = 0

    def add(self, latency_ns: int) -> None:
        if latency_ns <= MIN_NS:
            idx = 0
        elif latency_ns >= MAX_NS:
            idx = N_BUCKETS - 1
        else:
            idx = int(math.log(latency_ns / MIN_NS) / _LOG_GROWTH) + 1
            # float-boundary guard: ensure the bucket really covers the value
            if _BOUNDS[idx - 1] >= latency_ns:
                idx -= 1
            elif _BOUNDS[idx] < latency_ns:
                idx += 1
        self.counts[idx] += 1
        self.total += 1

    def add_many(self, latencies_ns) -> None:
        arr = np.asarray(latencies_ns, dtype=np.float64)
        idx = np.searchsorted(_BOUNDS, arr, side="left")
        np.clip(idx, 0, N_BUCKETS - 1, out=idx)
        self.counts += np.bincount(idx, minlength=N_BUCKETS)
        self.total += arr.size

    def merge(self, other: "LatencyHistogram") -> None:
        self.counts += other.counts
        self.total += other.total

    def percentile(self, q: float) -> float | None:
        """Nearest-rank percentile in nanoseconds; None when empty."""
        if not 0.0 < q < 1.0:
            raise ConfigError(f"percentile q must be in (0, 1), got {q}")
        if self.total == 0:
            return None
        rank = math.ceil(q * self.total)
        cum = np.cumsum(self.counts)
        idx = int(np.searchsorted(cum, rank))
        return float(_BOUNDS[idx]) if idx else float(MIN_NS)

    def percentile_ms(self, q: float) -> float | None:
        v = self.percentile(q)
        return None if v is None else v / 1e6

    def to_sparse(self) -> dict:
        nz = np.nonzero(self.counts)[0]
        return {
            "total": self.total,
            "buckets": {int(i): int(self.counts[i]) for i in nz},
        }

    @classmethod
    def from_sparse(cls, obj: dict) -> "LatencyHistogram":
        h = cls()
        for i, c in obj["buckets"].items():
            h.counts[int(i)] = c
        h.total = obj["total"]
        return h
