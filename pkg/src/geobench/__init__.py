"""geobench: deterministic discrete-event benchmarking for geo-distributed
OLTP transaction protocols."""

from .core import (
    HomeSpan,
    PartitionSpan,
    PlacementMap,
    Topology,
    Transaction,
    TxnClass,
    assign_homes,
    classify,
    region_set,
)

__version__ = "0.1.0"

__all__ = [
    "HomeSpan",
    "PartitionSpan",
    "PlacementMap",
    "Topology",
    "Transaction",
    "TxnClass",
    "assign_homes",
    "classify",
    "region_set",
    "__version__",
]
