"""Geo-aware YCSB-style key-value workload.

Each transaction first draws a target home-span class from the configured
(LSH, FSH, MH) weights, then picks partitions that make the classifier
return exactly that class. Keys inside a partition split into a hot set
(sampled with the Zipfian sampler) and a cold set (uniform).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..core import HomeSpan, PlacementIndex, Transaction, TxnClass, PartitionSpan
from ..errors import ConfigError, GenerationError
from .zipf import ZipfSampler


@dataclass(frozen=True)
class YcsbConfig:
    lsh_pct: float = 0.50
    fsh_pct: float = 0.25
    mh_pct: float = 0.25
    mp_pct: float = 0.50
    hot_keys_per_txn: int = 2
    cold_keys_per_txn: int = 8
    theta: float = 0.0
    hot_set_size: int = 100
    table_size: int = 100_000
    value_bytes: int = 1000  # 10 columns x 100 random bytes
    read_fraction: float = 0.5
    mh_fanout: int = 2
    mp_partitions: int = 2

    def __post_init__(self):
        total = self.lsh_pct + self.fsh_pct + self.mh_pct
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"lsh+fsh+mh must sum to 1, got {total!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must be in [0, 1], got {self.theta}")
        if self.hot_keys_per_txn + self.cold_keys_per_txn < 1:
            raise ConfigError("a transaction must touch at least one key")
        if not 0 <= self.hot_set_size <= self.table_size:
            raise ConfigError("hot_set_size must be within the table")
        if self.hot_keys_per_txn > 0 and self.hot_set_size < 1:
            raise ConfigError("hot keys requested but hot_set_size is 0")
        if self.cold_keys_per_txn > 0 and self.table_size <= self.hot_set_size:
            raise ConfigError("cold keys requested but the cold set is empty")
        if not 0.0 <= self.mp_pct <= 1.0:
            raise ConfigError("mp_pct must be in [0, 1]")
        if not 0.0 <= self.read_fraction <= 1.0:
            raise ConfigError("read_fraction must be in [0, 1]")
        if self.mh_fanout < 2:
            raise ConfigError("mh_fanout must be >= 2")
        if self.mp_partitions < 2:
            raise ConfigError("mp_partitions must be >= 2")


def _target_class(cfg: YcsbConfig, u: float) -> HomeSpan:
    if u < cfg.lsh_pct:
        return HomeSpan.LSH
    if u < cfg.lsh_pct + cfg.fsh_pct:
        return HomeSpan.FSH
    return HomeSpan.MH


def _mp_probability(cfg: YcsbConfig) -> float:
    # mp_pct is the overall MP share; MH transactions are MP by construction,
    # so the residual probability applies to single-home classes only.
    if cfg.mh_pct >= 1.0:
        return 0.0
    return max(0.0, min(1.0, (cfg.mp_pct - cfg.mh_pct) / (1.0 - cfg.mh_pct)))


class YcsbGenerator:
    """Stateful generator bound to one placement; cheap per-txn calls."""

    def __init__(self, cfg: YcsbConfig, pindex: PlacementIndex):
        self.cfg = cfg
        self.pindex = pindex
        self.zipf = ZipfSampler(cfg.hot_set_size, cfg.theta) if cfg.hot_set_size else None
        self._sp_mp_p = _mp_probability(cfg)

    def _pick_partitions(
        self, target: HomeSpan, origin: int, rng: random.Random
    ) -> list[int]:
        cfg = self.cfg
        idx = self.pindex
        if target is HomeSpan.LSH:
            pool = idx.partitions_in(origin)
            if not pool:
                raise GenerationError(
                    f"cannot generate LSH transaction: no partitions homed in "
                    f"region {origin}"
                )
            want = cfg.mp_partitions if rng.random() < self._sp_mp_p else 1
            want = min(want, len(pool))
            return rng.sample(pool, want) if want > 1 else [pool[rng.randrange(len(pool))]]
        if target is HomeSpan.FSH:
            foreign = [r for r in idx.nonempty_regions if r != origin]
            if not foreign:
                raise GenerationError(
                    "cannot generate FSH transaction: no foreign region holds data"
                )
            region = foreign[rng.randrange(len(foreign))]
            pool = idx.partitions_in(region)
            want = cfg.mp_partitions if rng.random() < self._sp_mp_p else 1
            want = min(want, len(pool))
            return rng.sample(pool, want) if want > 1 else [pool[rng.randrange(len(pool))]]
        # MH: pick mh_fanout distinct regions, origin included with prob 1/2
        foreign = [r for r in idx.nonempty_regions if r != origin]
        has_origin = bool(idx.partitions_in(origin))
        fanout = min(cfg.mh_fanout, len(foreign) + (1 if has_origin else 0))
        if fanout < 2:
            raise GenerationError(
                "cannot generate MH transaction: fewer than two regions hold data"
            )
        if has_origin and rng.random() < 0.5:
            regions = [origin] + rng.sample(foreign, fanout - 1)
        else:
            if len(foreign) < fanout:
                regions = [origin] + rng.sample(foreign, fanout - 1)
            else:
                regions = rng.sample(foreign, fanout)
        return [
            idx.partitions_in(r)[rng.randrange(len(idx.partitions_in(r)))]
            for r in regions
        ]

    def generate(
        self,
        origin: int,
        class_rng: random.Random,
        key_rng: random.Random,
        txn_id: int,
        submit_time: int,
    ) -> Transaction:
        cfg = self.cfg
        target = _target_class(cfg, class_rng.random())
        parts = self._pick_partitions(target, origin, key_rng)

        n_keys = cfg.hot_keys_per_txn + cfg.cold_keys_per_txn
        reads: list[tuple[int, int]] = []
        writes: list[tuple[int, int]] = []
        table = cfg.table_size
        hot = cfg.hot_set_size
        cold_span = table - hot
        for i in range(n_keys):
            # the first len(parts) keys pin one key to each chosen partition
            p = parts[i] if i < len(parts) else parts[key_rng.randrange(len(parts))]
            if i < cfg.hot_keys_per_txn and self.zipf is not None:
                local = self.zipf.sample(key_rng) - 1
            else:
                local = hot + key_rng.randrange(cold_span) if cold_span else key_rng.randrange(table)
            ref = (p, p * table + local)
            if key_rng.random() < cfg.read_fraction:
                reads.append(ref)
            else:
                writes.append(ref)
        if not reads and not writes:  # pragma: no cover - n_keys >= 1 guarantees
            writes.append((parts[0], parts[0] * table))
        span = PartitionSpan.SP if len(set(parts)) == 1 else PartitionSpan.MP
        return Transaction(
            id=txn_id,
            origin=origin,
            read_set=tuple(dict.fromkeys(reads)),
            write_set=tuple(dict.fromkeys(writes)),
            logic_tag="ycsb_rw",
            submit_time=submit_time,
            value_bytes=cfg.value_bytes,
            txn_class=TxnClass(span, target),
        )


def gen_ycsb_txn(
    cfg: YcsbConfig,
    pindex: PlacementIndex,
    origin: int,
    class_rng: random.Random,
    key_rng: random.Random,
    txn_id: int = 1,
    submit_time: int = 0,
) -> Transaction:
    """One-shot convenience wrapper around :class:`YcsbGenerator`."""
    return YcsbGenerator(cfg, pindex).generate(
        origin, class_rng, key_rng, txn_id, submit_time
    )
