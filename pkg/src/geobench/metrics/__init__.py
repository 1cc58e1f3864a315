from .histogram import LatencyHistogram
from .cost import CostInputs, CostBreakdown, cost_per_txn
from .report import (
    CostPricing,
    MetricsCollector,
    RunReport,
    write_csv,
    CSV_COLUMNS,
    DEFAULT_WARMUP_S,
)

__all__ = [
    "LatencyHistogram",
    "CostInputs",
    "CostBreakdown",
    "cost_per_txn",
    "CostPricing",
    "MetricsCollector",
    "RunReport",
    "write_csv",
    "CSV_COLUMNS",
    "DEFAULT_WARMUP_S",
]
