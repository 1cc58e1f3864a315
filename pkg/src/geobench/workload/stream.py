"""Workload streams: arrival schedules, origin assignment, and the
newline-delimited JSON dump format.

A stream is fully determined by (workload config, placement, arrival spec,
duration, seed); iterating it twice yields byte-identical transactions.
"""

from __future__ import annotations

import bisect
import hashlib
import heapq
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Union

from ..core import (
    HomeSpan,
    PartitionSpan,
    PlacementIndex,
    PlacementMap,
    Transaction,
    TxnClass,
    derive_seed,
)
from ..errors import ConfigError
from .tpcc import TpccConfig, TpccGenerator
from .ycsb import YcsbConfig, YcsbGenerator

NS = 1_000_000_000


@dataclass(frozen=True)
class OpenArrival:
    """Open-loop arrivals at a configured aggregate rate.

    ``fixed`` spacing submits at a constant rate; ``poisson`` uses
    exponential inter-arrival gaps.
    """

    rate_tps: float
    spacing: str = "fixed"

    def __post_init__(self):
        if self.rate_tps <= 0:
            raise ConfigError(f"arrival rate must be positive, got {self.rate_tps}")
        if self.spacing not in ("fixed", "poisson"):
            raise ConfigError(f"unknown spacing {self.spacing!r}")


@dataclass(frozen=True)
class ClosedArrival:
    """A fixed client fleet, each submitting at a per-client rate without
    waiting for responses."""

    clients: int
    per_client_tps: float

    def __post_init__(self):
        if self.clients < 1:
            raise ConfigError("need at least one client")
        if self.per_client_tps <= 0:
            raise ConfigError(
                f"per-client rate must be positive, got {self.per_client_tps}"
            )


Arrival = Union[OpenArrival, ClosedArrival]


def _submit_times_ns(arrival: Arrival, duration_s: float, rng: random.Random):
    horizon = int(duration_s * NS)
    if isinstance(arrival, OpenArrival):
        if arrival.spacing == "fixed":
            gap = NS / arrival.rate_tps
            k = 0
            t = 0.0
            while t < horizon:
                yield int(t)
                k += 1
                t = k * gap
        else:
            t = 0.0
            while True:
                t += rng.expovariate(arrival.rate_tps) * NS
                if t >= horizon:
                    return
                yield int(t)
    else:
        period = NS / arrival.per_client_tps
        heads = [
            (c * period / arrival.clients, c, 0) for c in range(arrival.clients)
        ]
        heapq.heapify(heads)
        while heads:
            t, c, k = heapq.heappop(heads)
            if t >= horizon:
                continue
            yield int(t)
            heapq.heappush(heads, (c * period / arrival.clients + (k + 1) * period, c, k + 1))


@dataclass(frozen=True)
class WorkloadStream:
    config: Union[YcsbConfig, TpccConfig]
    placement: PlacementMap
    arrival: Arrival
    duration_s: float
    seed: int
    origin_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ConfigError(f"duration must be positive, got {self.duration_s}")
        if self.origin_weights is not None:
            if len(self.origin_weights) != self.placement.n_regions:
                raise ConfigError("origin_weights length must match region count")
            if abs(sum(self.origin_weights) - 1.0) > 1e-9:
                raise ConfigError("origin_weights must sum to 1")

    def _origin_cdf(self, pindex: PlacementIndex) -> list[float]:
        if self.origin_weights is not None:
            weights = list(self.origin_weights)
        elif isinstance(self.config, TpccConfig):
            # clients sit where the data is: weight by warehouse share
            total = self.placement.n_partitions
            weights = [len(pindex.partitions_in(r)) / total
                       for r in range(self.placement.n_regions)]
        else:
            n = self.placement.n_regions
            weights = [1.0 / n] * n
        cdf = []
        acc = 0.0
        for w in weights:
            acc += w
            cdf.append(acc)
        cdf[-1] = 1.0
        return cdf

    def transactions(self) -> Iterator[Transaction]:
        """Fresh deterministic iterator over the whole stream."""
        pindex = PlacementIndex(self.placement)
        arrival_rng = random.Random(derive_seed(self.seed, "arrival"))
        origin_rng = random.Random(derive_seed(self.seed, "origin"))
        cdf = self._origin_cdf(pindex)
        if isinstance(self.config, TpccConfig):
            gen = TpccGenerator(self.config, pindex)
            type_rng = random.Random(derive_seed(self.seed, "type"))
            flag_rng = random.Random(derive_seed(self.seed, "flags"))
            choice_rng = random.Random(derive_seed(self.seed, "choice"))
            make = lambda origin, i, t: gen.generate(
                origin, type_rng, flag_rng, choice_rng, i, t
            )
        else:
            gen = YcsbGenerator(self.config, pindex)
            class_rng = random.Random(derive_seed(self.seed, "class"))
            key_rng = random.Random(derive_seed(self.seed, "keys"))
            make = lambda origin, i, t: gen.generate(origin, class_rng, key_rng, i, t)
        txn_id = 0
        for t in _submit_times_ns(self.arrival, self.duration_s, arrival_rng):
            txn_id += 1
            origin = bisect.bisect_left(cdf, origin_rng.random())
            yield make(origin, txn_id, t)

    def take(self, n: int) -> list[Transaction]:
        out = []
        for txn in self.transactions():
            out.append(txn)
            if len(out) >= n:
                break
        return out


def txn_to_record(txn: Transaction) -> dict:
    return {
        "id": txn.id,
        "origin": txn.origin,
        "class": txn.txn_class.label if txn.txn_class else None,
        "logic_tag": txn.logic_tag,
        "read_set": [list(ref) for ref in txn.read_set],
        "write_set": [list(ref) for ref in txn.write_set],
        "submit_time_ns": txn.submit_time,
        "value_bytes": txn.value_bytes,
    }


def txn_from_record(obj: dict) -> Transaction:
    cls = None
    if obj.get("class"):
        span, home = obj["class"].split("-")
        cls = TxnClass(PartitionSpan(span), HomeSpan(home))
    return Transaction(
        id=obj["id"],
        origin=obj["origin"],
        read_set=tuple((p, k) for p, k in obj["read_set"]),
        write_set=tuple((p, k) for p, k in obj["write_set"]),
        logic_tag=obj["logic_tag"],
        submit_time=obj["submit_time_ns"],
        value_bytes=obj.get("value_bytes", 0),
        txn_class=cls,
    )


def dump_stream(txns: Iterable[Transaction], path: str | Path) -> int:
    """Write one JSON record per line; returns the number of transactions."""
    count = 0
    with open(path, "w") as fh:
        for txn in txns:
            fh.write(json.dumps(txn_to_record(txn), separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count


def load_stream(path: str | Path) -> list[Transaction]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(txn_from_record(json.loads(line)))
    return out


def stream_hash(txns: Iterable[Transaction]) -> str:
    """SHA-256 over the serialized stream; equal config+seed => equal hash."""
    h = hashlib.sha256()
    for txn in txns:
        h.update(json.dumps(txn_to_record(txn), separators=(",", ":")).encode())
        h.update(b"\n")
    return h.hexdigest()
