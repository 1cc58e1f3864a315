import random

import pytest

from geobench.config import (
    ArrivalSection,
    RunConfig,
    TopologySection,
    WorkloadSection,
    YcsbSection,
)
from geobench.core import PlacementMap, Transaction, assign_homes
from geobench.scenarios.runner import build_run


def make_txn(reads=(), writes=(), origin=0, txn_id=1, submit=0, value_bytes=100):
    return Transaction(
        id=txn_id,
        origin=origin,
        read_set=tuple(reads),
        write_set=tuple(writes),
        logic_tag="ycsb_rw",
        submit_time=submit,
        value_bytes=value_bytes,
    )


def placement_of(homes, n_regions=None, replicas=None):
    n = n_regions if n_regions is not None else (max(homes) + 1)
    reps = tuple(replicas) if replicas else ((),) * len(homes)
    return PlacementMap(homes=tuple(homes), replicas=reps, n_regions=n)


def random_txn(rng: random.Random, placement: PlacementMap, max_keys=6):
    nparts = placement.n_partitions
    n = rng.randint(1, max_keys)
    reads, writes = [], []
    for _ in range(n):
        ref = (rng.randrange(nparts), rng.randrange(1000))
        (reads if rng.random() < 0.5 else writes).append(ref)
    if not reads and not writes:
        writes.append((0, 0))
    return make_txn(reads, writes, origin=rng.randrange(placement.n_regions),
                    txn_id=rng.randrange(1, 2**40))


def small_run_config(protocol="echo", **kw) -> RunConfig:
    defaults = dict(
        workload=WorkloadSection(kind="ycsb", ycsb=YcsbSection()),
        topology=TopologySection(regions=3, servers_per_region=2, partitions=12),
        arrival=ArrivalSection(mode="open", rate_tps=100.0),
        duration_s=5.0,
        warmup_s=1.0,
        protocol=protocol,
        seed=1,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


def run_to_quiescence(config: RunConfig):
    """Run a config to completion, retaining (outcome, txn) pairs."""
    ctx = build_run(config)
    ctx.collector.keep_raw = True
    ctx.engine.quiesce()
    outcomes = [o for o, _ in ctx.collector.raw]
    txns = {t.id: t for _, t in ctx.collector.raw}
    return ctx, outcomes, txns


@pytest.fixture
def rng():
    return random.Random(20240601)
