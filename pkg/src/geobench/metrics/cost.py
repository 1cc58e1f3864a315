"""Monetary cost per transaction.

Cost rate ($/hour) = servers x hourly price + transferred GB/hour x price
per GB + stored GB x price per GB-hour; dividing by throughput in
transactions/hour gives dollars per transaction. Throughput must come from
the measurement window (warm-up excluded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ConfigError

DEFAULT_TRANSFER_PRICE_PER_GB = 0.02  # inside the public-cloud 1-9 cent range
DEFAULT_STORAGE_PRICE_PER_GB_HOUR = 0.0001


@dataclass(frozen=True)
class CostInputs:
    n_servers: int
    server_price_hr: float
    transfer_gb_per_hr: float
    transfer_price_gb: float = DEFAULT_TRANSFER_PRICE_PER_GB
    storage_gb: float = 0.0
    storage_price_gb_hr: float = DEFAULT_STORAGE_PRICE_PER_GB_HOUR
    throughput_tps: float = 0.0

    def __post_init__(self):
        for name in (
            "n_servers",
            "server_price_hr",
            "transfer_gb_per_hr",
            "transfer_price_gb",
            "storage_gb",
            "storage_price_gb_hr",
            "throughput_tps",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"cost input {name} must be non-negative")


@dataclass(frozen=True)
class CostBreakdown:
    fixed_per_txn: float  # VM rental + durable storage
    transfer_per_txn: float
    total_per_txn: float
    infinite: bool = False
    note: str | None = None

    @property
    def cents_per_10k(self) -> float:
        if self.infinite:
            return math.inf
        return self.total_per_txn * 10_000 * 100


def cost_per_txn(inputs: CostInputs) -> CostBreakdown:
    fixed_rate = (
        inputs.n_servers * inputs.server_price_hr
        + inputs.storage_gb * inputs.storage_price_gb_hr
    )
    transfer_rate = inputs.transfer_gb_per_hr * inputs.transfer_price_gb
    if inputs.throughput_tps <= 0:
        return CostBreakdown(
            fixed_per_txn=math.inf if fixed_rate else 0.0,
            transfer_per_txn=math.inf if transfer_rate else 0.0,
            total_per_txn=math.inf if (fixed_rate or transfer_rate) else 0.0,
            infinite=bool(fixed_rate or transfer_rate),
            note="zero committed throughput: cost per transaction is unbounded",
        )
    txns_per_hr = inputs.throughput_tps * 3600.0
    fixed = fixed_rate / txns_per_hr
    transfer = transfer_rate / txns_per_hr
    return CostBreakdown(
        fixed_per_txn=fixed,
        transfer_per_txn=transfer,
        total_per_txn=fixed + transfer,
    )
