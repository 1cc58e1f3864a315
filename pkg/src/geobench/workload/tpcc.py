"""Simplified geo-distributed TPC-C key-set workload.

Warehouse id doubles as partition id. The five transaction profiles only
produce read/write key sets over the nine-table key space (no SQL, no
think time); that is enough to drive access-pattern classification,
contention, and message-volume modeling.

Remote behavior follows the conventional geo-TPC-C setup: every NewOrder
item independently sources from a foreign-region warehouse with
probability ``remote_prob``, and a Payment targets a foreign-region
warehouse outright with the same probability (those payments touch only
the foreign warehouse, which is what makes them foreign-single-home).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from ..core import (
    HomeSpan,
    PartitionSpan,
    PlacementIndex,
    PlacementMap,
    Transaction,
    TxnClass,
)
from ..errors import ConfigError, GenerationError

TXN_TYPES = ("new_order", "payment", "delivery", "order_status", "stock_level")

# key id = (table * 10^5 + warehouse) * 10^8 + record
TABLES = {
    "warehouse": 0,
    "district": 1,
    "customer": 2,
    "item": 3,
    "stock": 4,
    "orders": 5,
    "order_line": 6,
    "new_order": 7,
    "history": 8,
}
_REC = 10**8
_WH = 10**5

# The geo-distribution ceiling: delivery/order_status/stock_level are
# local-warehouse by design, so at most new_order + payment (88% of the
# default mix) can become FSH or MH.
GEO_PCT_CEILING = 0.88


def _key(table: int, wid: int, rec: int) -> int:
    return (table * _WH + wid) * _REC + rec


@dataclass(frozen=True)
class TpccConfig:
    warehouses: int = 1200
    remote_prob: float = 0.01
    txn_mix: tuple[float, float, float, float, float] = (0.44, 0.44, 0.04, 0.04, 0.04)
    items_per_order: int = 10
    districts_per_warehouse: int = 10
    customers_per_district: int = 3000
    items: int = 100_000
    item_pool: int | None = None
    customer_pool: int | None = None
    value_bytes: int = 100
    # Access-pattern sweep knobs (see sweep_geo_pct): when force_geo_prob is
    # set, a NewOrder is either all-local or sources half its items from one
    # remote region, with that probability; payment_remote_prob overrides
    # remote_prob for Payment.
    force_geo_prob: float | None = None
    payment_remote_prob: float | None = None

    def __post_init__(self):
        if self.warehouses < 1:
            raise ConfigError("need at least one warehouse")
        if not 0.0 <= self.remote_prob <= 1.0:
            raise ConfigError(f"remote_prob must be in [0, 1], got {self.remote_prob}")
        if len(self.txn_mix) != 5:
            raise ConfigError("txn_mix needs five weights (one per transaction type)")
        if any(w < 0 for w in self.txn_mix):
            raise ConfigError("txn_mix weights must be non-negative")
        if abs(sum(self.txn_mix) - 1.0) > 1e-9:
            raise ConfigError(f"txn_mix must sum to 1, got {sum(self.txn_mix)!r}")
        if self.items_per_order < 1:
            raise ConfigError("items_per_order must be >= 1")
        for name, pool, limit in (
            ("item_pool", self.item_pool, self.items),
            ("customer_pool", self.customer_pool, self.customers_per_district),
        ):
            if pool is not None and not 1 <= pool <= limit:
                raise ConfigError(f"{name} must be in [1, {limit}], got {pool}")
        if self.force_geo_prob is not None and not 0.0 <= self.force_geo_prob <= 1.0:
            raise ConfigError("force_geo_prob must be in [0, 1]")
        if self.payment_remote_prob is not None and not (
            0.0 <= self.payment_remote_prob <= 1.0
        ):
            raise ConfigError("payment_remote_prob must be in [0, 1]")


def tpcc_placement(cfg: TpccConfig, n_regions: int) -> PlacementMap:
    """Round-robin warehouse-to-region assignment (uniform case)."""
    if cfg.warehouses % n_regions != 0:
        raise ConfigError(
            f"{cfg.warehouses} warehouses not divisible by {n_regions} regions; "
            "uniform placement needs equal shares"
        )
    homes = tuple(w % n_regions for w in range(cfg.warehouses))
    return PlacementMap(
        homes=homes, replicas=((),) * cfg.warehouses, n_regions=n_regions
    )


def sweep_geo_pct(cfg: TpccConfig, geo_pct: float) -> TpccConfig:
    """Config whose expected FSH+MH share is ``geo_pct``, split evenly.

    Payments drive FSH; NewOrders forced into all-local/half-remote mode
    drive MH. Each type is 44% of the mix, so a per-type probability of
    ``geo_pct / 0.88`` yields geo_pct/2 from each side; the remaining 12%
    of transactions stay LSH by design.
    """
    if not 0.0 <= geo_pct <= GEO_PCT_CEILING:
        raise ConfigError(
            f"geo_pct must be in [0, {GEO_PCT_CEILING}] (structural ceiling), "
            f"got {geo_pct}"
        )
    share = cfg.txn_mix[0] + cfg.txn_mix[1]
    if share <= 0:
        raise ConfigError("geo sweep needs new_order and payment in the mix")
    prob = min(1.0, geo_pct / share)
    return replace(cfg, force_geo_prob=prob, payment_remote_prob=prob)


class TpccGenerator:
    """Stateful generator bound to one placement.

    Three independent rng streams keep the type sequence and remote-flag
    sequence identical across placements, so two runs that differ only in
    geography see the same class mix.
    """

    def __init__(self, cfg: TpccConfig, pindex: PlacementIndex):
        if pindex.placement.n_partitions != cfg.warehouses:
            raise ConfigError(
                f"placement has {pindex.placement.n_partitions} partitions for "
                f"{cfg.warehouses} warehouses"
            )
        remote_possible = (
            cfg.remote_prob > 0
            or (cfg.payment_remote_prob or 0) > 0
            or (cfg.force_geo_prob or 0) > 0
        )
        if remote_possible and len(pindex.nonempty_regions) < 2:
            raise ConfigError(
                "remote warehouse accesses need warehouses in at least two regions"
            )
        self.cfg = cfg
        self.pindex = pindex
        # foreign warehouses per origin region, flattened for O(1) picks
        self._foreign: dict[int, tuple[int, ...]] = {}
        for r in pindex.nonempty_regions:
            self._foreign[r] = tuple(
                w
                for rr in pindex.nonempty_regions
                if rr != r
                for w in pindex.partitions_in(rr)
            )
        cum = []
        acc = 0.0
        for w in cfg.txn_mix:
            acc += w
            cum.append(acc)
        cum[-1] = 1.0
        self._mix_cum = cum
        self._pay_remote = (
            cfg.payment_remote_prob
            if cfg.payment_remote_prob is not None
            else cfg.remote_prob
        )

    def _txn_type(self, u: float) -> int:
        cum = self._mix_cum
        for i in range(5):
            if u < cum[i]:
                return i
        return 4

    def generate(
        self,
        origin: int,
        type_rng: random.Random,
        flag_rng: random.Random,
        choice_rng: random.Random,
        txn_id: int,
        submit_time: int,
    ) -> Transaction:
        cfg = self.cfg
        locals_ = self.pindex.partitions_in(origin)
        if not locals_:
            raise GenerationError(f"region {origin} has no local warehouses")
        rnd = choice_rng.random
        kind = self._txn_type(type_rng.random())
        home = locals_[int(rnd() * len(locals_))]
        d = int(rnd() * cfg.districts_per_warehouse)
        c = int(rnd() * (cfg.customer_pool or cfg.customers_per_district))
        reads: list[tuple[int, int]] = []
        writes: list[tuple[int, int]] = []
        homes = self.pindex.placement.homes
        item_pool = cfg.item_pool or cfg.items

        if kind == 0:  # new_order
            n_items = cfg.items_per_order
            if cfg.force_geo_prob is None:
                p = cfg.remote_prob
                flags = [flag_rng.random() < p for _ in range(n_items)]
            else:
                # all-local or half-remote; one flag draw keeps the stream
                # aligned across placements
                geo = flag_rng.random() < cfg.force_geo_prob
                n_remote = max(1, n_items // 2) if geo else 0
                flags = [i < n_remote for i in range(n_items)]
            home_base = _WH * _REC + home * _REC  # district table
            reads.append((home, home * _REC))  # warehouse row
            reads.append((home, home_base + d))
            reads.append((home, 2 * _WH * _REC + home * _REC + d * _WH + c))
            writes.append((home, home_base + d))
            writes.append((home, 5 * _WH * _REC + home * _REC + txn_id % _REC))
            writes.append((home, 7 * _WH * _REC + home * _REC + txn_id % _REC))
            foreign = self._foreign.get(origin, ())
            nf = len(foreign)
            ol_base = 6 * _WH * _REC + home * _REC
            for i in range(n_items):
                iid = int(rnd() * item_pool)
                if flags[i] and nf:
                    src = foreign[int(rnd() * nf)]
                else:
                    src = home
                src_base = src * _REC + iid
                reads.append((src, 3 * _WH * _REC + src_base))
                reads.append((src, 4 * _WH * _REC + src_base))
                writes.append((src, 4 * _WH * _REC + src_base))
                writes.append((home, ol_base + (txn_id * 16 + i) % _REC))
            tag = "new_order"
        elif kind == 1:  # payment
            remote = flag_rng.random() < self._pay_remote
            foreign = self._foreign.get(origin, ())
            wid = foreign[int(rnd() * len(foreign))] if remote and foreign else home
            cust = 2 * _WH * _REC + wid * _REC + d * _WH + c
            reads.append((wid, wid * _REC))
            reads.append((wid, _WH * _REC + wid * _REC + d))
            reads.append((wid, cust))
            writes.append((wid, wid * _REC))
            writes.append((wid, _WH * _REC + wid * _REC + d))
            writes.append((wid, cust))
            writes.append((wid, 8 * _WH * _REC + wid * _REC + txn_id % _REC))
            tag = "payment"
        elif kind == 2:  # delivery
            rec = int(rnd() * _REC)
            cust = 2 * _WH * _REC + home * _REC + d * _WH + c
            for table in (7, 5, 6):
                reads.append((home, table * _WH * _REC + home * _REC + rec))
                writes.append((home, table * _WH * _REC + home * _REC + rec))
            reads.append((home, cust))
            writes.append((home, cust))
            tag = "delivery"
        elif kind == 3:  # order_status (read-only)
            rec = int(rnd() * _REC)
            reads.append((home, 2 * _WH * _REC + home * _REC + d * _WH + c))
            reads.append((home, 5 * _WH * _REC + home * _REC + rec))
            reads.append((home, 6 * _WH * _REC + home * _REC + rec))
            tag = "order_status"
        else:  # stock_level (read-only)
            iid = int(rnd() * item_pool)
            reads.append((home, _WH * _REC + home * _REC + d))
            reads.append((home, 6 * _WH * _REC + home * _REC + int(rnd() * _REC)))
            reads.append((home, 4 * _WH * _REC + home * _REC + iid))
            tag = "stock_level"

        parts = {p for p, _ in reads}
        parts.update(p for p, _ in writes)
        regions = {homes[p] for p in parts}
        span = PartitionSpan.SP if len(parts) == 1 else PartitionSpan.MP
        if len(regions) >= 2:
            hs = HomeSpan.MH
        elif origin in regions:
            hs = HomeSpan.LSH
        else:
            hs = HomeSpan.FSH
        return Transaction(
            id=txn_id,
            origin=origin,
            read_set=tuple(dict.fromkeys(reads)),
            write_set=tuple(dict.fromkeys(writes)),
            logic_tag=tag,
            submit_time=submit_time,
            value_bytes=cfg.value_bytes,
            txn_class=TxnClass(span, hs),
        )


def gen_tpcc_txn(
    cfg: TpccConfig,
    pindex: PlacementIndex,
    origin: int,
    type_rng: random.Random,
    flag_rng: random.Random,
    choice_rng: random.Random,
    txn_id: int = 1,
    submit_time: int = 0,
) -> Transaction:
    """One-shot convenience wrapper around :class:`TpccGenerator`."""
    return TpccGenerator(cfg, pindex).generate(
        origin, type_rng, flag_rng, choice_rng, txn_id, submit_time
    )
