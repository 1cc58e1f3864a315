"""Wide-area network profile: per-region-pair RTTs, jitter, loss, and
optional bandwidth caps.

One-way delay is modeled as rtt/2 scaled by a uniform multiplicative
jitter in [1 - j, 1 + j], which keeps the mean exactly at rtt/2 and never
goes negative. The repository ships no measured RTT matrix; the synthetic
generator produces a deterministic matrix rescaled to a target mean
(default 111 ms) and marks the profile as synthetic.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from ..errors import ConfigError

DEFAULT_INTRA_RTT_MS = 0.5
DEFAULT_MEAN_RTT_MS = 111.0
DEFAULT_JITTER_FRACTION = 0.10


@dataclass(frozen=True)
class WanProfile:
    rtt_ms: tuple[tuple[float, ...], ...]
    jitter_fraction: float = DEFAULT_JITTER_FRACTION
    loss_prob: float = 0.0
    bandwidth_bytes_per_s: float | None = None  # per-link serialization cap
    region_labels: tuple[str, ...] | None = None
    synthetic: bool = False

    def __post_init__(self):
        n = len(self.rtt_ms)
        for i, row in enumerate(self.rtt_ms):
            if len(row) != n:
                raise ConfigError("rtt matrix must be square")
            for j, v in enumerate(row):
                if v < 0:
                    raise ConfigError(f"negative rtt at ({i},{j})")
                if abs(v - self.rtt_ms[j][i]) > 1e-9:
                    raise ConfigError(f"rtt matrix not symmetric at ({i},{j})")
        if not 0.0 <= self.loss_prob < 1.0:
            raise ConfigError(f"loss_prob must be in [0, 1), got {self.loss_prob}")
        if self.jitter_fraction < 0:
            raise ConfigError("jitter_fraction must be >= 0")
        if self.bandwidth_bytes_per_s is not None and self.bandwidth_bytes_per_s <= 0:
            raise ConfigError("bandwidth cap must be positive")
        if self.region_labels is not None and len(self.region_labels) != n:
            raise ConfigError("region_labels must match matrix size")

    @property
    def n_regions(self) -> int:
        return len(self.rtt_ms)

    def rtt(self, a: int, b: int) -> float:
        return self.rtt_ms[a][b]

    def mean_inter_region_rtt(self) -> float:
        n = self.n_regions
        if n < 2:
            return 0.0
        total = sum(
            self.rtt_ms[i][j] for i in range(n) for j in range(n) if i != j
        )
        return total / (n * (n - 1))

    @classmethod
    def uniform(
        cls,
        n_regions: int,
        inter_ms: float,
        intra_ms: float = DEFAULT_INTRA_RTT_MS,
        **kw,
    ) -> "WanProfile":
        rows = tuple(
            tuple(intra_ms if i == j else inter_ms for j in range(n_regions))
            for i in range(n_regions)
        )
        return cls(rtt_ms=rows, **kw)

    @classmethod
    def synthetic_matrix(
        cls,
        n_regions: int,
        mean_rtt_ms: float = DEFAULT_MEAN_RTT_MS,
        intra_ms: float = DEFAULT_INTRA_RTT_MS,
        spread: float = 0.45,
        seed: int = 7,
        **kw,
    ) -> "WanProfile":
        """Deterministic pseudo-geographic matrix with an exact given mean."""
        if n_regions < 2:
            raise ConfigError("synthetic matrix needs at least two regions")
        rng = random.Random(seed)
        raw = [[0.0] * n_regions for _ in range(n_regions)]
        for i in range(n_regions):
            for j in range(i + 1, n_regions):
                raw[i][j] = raw[j][i] = 1.0 + spread * (2 * rng.random() - 1)
        mean = sum(
            raw[i][j] for i in range(n_regions) for j in range(n_regions) if i != j
        ) / (n_regions * (n_regions - 1))
        scale = mean_rtt_ms / mean
        rows = tuple(
            tuple(
                intra_ms if i == j else round(raw[i][j] * scale, 3)
                for j in range(n_regions)
            )
            for i in range(n_regions)
        )
        return cls(rtt_ms=rows, synthetic=True, **kw)

    def scaled(self, factor: float) -> "WanProfile":
        """Scale inter-region RTTs (diagonal untouched); used by ablations."""
        rows = tuple(
            tuple(v if i == j else v * factor for j, v in enumerate(row))
            for i, row in enumerate(self.rtt_ms)
        )
        return replace(self, rtt_ms=rows)

    def with_mean(self, mean_ms: float) -> "WanProfile":
        """Rescale inter-region RTTs to a given mean (0 collapses the WAN)."""
        current = self.mean_inter_region_rtt()
        if current == 0:
            return replace(
                self,
                rtt_ms=tuple(
                    tuple(row[j] if i == j else mean_ms for j in range(len(row)))
                    for i, row in enumerate(self.rtt_ms)
                ),
            )
        return self.scaled(mean_ms / current)

    def to_json(self) -> str:
        obj = {
            "regions": list(self.region_labels)
            if self.region_labels
            else [f"region-{i}" for i in range(self.n_regions)],
            "rtt_ms": [list(r) for r in self.rtt_ms],
            "jitter_fraction": self.jitter_fraction,
            "loss_prob": self.loss_prob,
        }
        if self.bandwidth_bytes_per_s is not None:
            obj["bandwidth_bytes_per_s"] = self.bandwidth_bytes_per_s
        if self.synthetic:
            obj["synthetic"] = True
        return json.dumps(obj, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "WanProfile":
        obj = json.loads(text)
        return cls(
            rtt_ms=tuple(tuple(float(v) for v in row) for row in obj["rtt_ms"]),
            jitter_fraction=float(obj.get("jitter_fraction", DEFAULT_JITTER_FRACTION)),
            loss_prob=float(obj.get("loss_prob", 0.0)),
            bandwidth_bytes_per_s=obj.get("bandwidth_bytes_per_s"),
            region_labels=tuple(obj["regions"]) if "regions" in obj else None,
            synthetic=bool(obj.get("synthetic", False)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "WanProfile":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"WAN profile file not found: {p}")
        return cls.from_json(p.read_text())
