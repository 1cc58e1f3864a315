from .zipf import ZipfSampler
from .ycsb import YcsbConfig, gen_ycsb_txn
from .tpcc import TpccConfig, gen_tpcc_txn, sweep_geo_pct, tpcc_placement
from .stream import (
    ClosedArrival,
    OpenArrival,
    WorkloadStream,
    dump_stream,
    load_stream,
    stream_hash,
)

__all__ = [
    "ZipfSampler",
    "YcsbConfig",
    "gen_ycsb_txn",
    "TpccConfig",
    "gen_tpcc_txn",
    "sweep_geo_pct",
    "tpcc_placement",
    "OpenArrival",
    "ClosedArrival",
    "WorkloadStream",
    "dump_stream",
    "load_stream",
    "stream_hash",
]
