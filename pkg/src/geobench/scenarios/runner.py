"""Run assembly and scenario sweeps.

Seed policy (stable across versions): the seed for sweep point ``i`` of a
scenario is ``derive_seed(base_seed, scenario_kind, i, repetition)``; the
workload stream seed is ``derive_seed(run_seed, "workload")`` unless the
config pins ``workload_seed``. Network-condition sweeps (latency_jitter,
packet_loss) pin the workload seed from the base config so every point
replays the same transaction stream under different impairments.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from typing import Optional

from ..config import RunConfig
from ..core import PlacementMap, Topology, assign_homes, derive_seed
from ..errors import ConfigError
from ..metrics.report import CostPricing, MetricsCollector, RunReport
from ..netsim.engine import Engine
from ..protocols import create as create_protocol, protocol_class
from ..workload.stream import WorkloadStream, load_stream
from ..workload.tpcc import TpccConfig, tpcc_placement
from .instances import INSTANCE_CLASSES, instance
from .spec import (
    FAULT_CRASH_S,
    FAULT_DURATION_S,
    FAULT_RECOVER_S,
    GEO_DISTRIBUTIONS,
    ScenarioSpec,
)


@dataclass
class RunContext:
    config: RunConfig
    topology: Topology
    placement: PlacementMap
    engine: Engine
    protocol: object
    collector: MetricsCollector
    replication_factor: float


def _distribute_servers(total: int, weights: tuple[float, ...]) -> list[int]:
    """Largest-remainder split of a server fleet over region weights."""
    raw = [total * w for w in weights]
    counts = [int(x) for x in raw]
    rest = sorted(
        range(len(weights)), key=lambda i: (raw[i] - counts[i], -i), reverse=True
    )
    for i in rest[: total - sum(counts)]:
        counts[i] += 1
    return counts


def build_placement(
    config: RunConfig, topology: Topology, replication: int | str
) -> PlacementMap:
    live = topology.regions_with_servers()
    weights = config.topology.region_weights
    seed = derive_seed(config.seed, "placement")
    if config.workload.kind == "tpcc" and weights is None:
        # warehouse w lives in region w % R; replicas follow protocol policy
        base = tpcc_placement(config.workload.tpcc.build(), topology.n_regions)
        return PlacementMap(
            homes=base.homes,
            replicas=_replicas_for(base.homes, live, replication),
            n_regions=topology.n_regions,
        )
    return assign_homes(
        topology.n_partitions,
        topology.n_regions,
        seed,
        weights=weights,
        replication=replication,
        replica_regions=live,
    )


def _replicas_for(homes, eligible, replication) -> tuple[tuple[int, ...], ...]:
    out = []
    for p, home in enumerate(homes):
        others = [r for r in eligible if r != home]
        if replication == "full":
            out.append(tuple(others))
        else:
            k = min(int(replication), len(others))
            if others:
                start = p % len(others)
                out.append(tuple(others[(start + j) % len(others)] for j in range(k)))
            else:
                out.append(())
    return tuple(out)


def build_run(config: RunConfig, label: dict | None = None) -> RunContext:
    topo_section = config.topology
    if config.workload.kind == "tpcc":
        warehouses = config.workload.tpcc.warehouses
        topo_section = topo_section.model_copy(update={"partitions": warehouses})
    topology = topo_section.build()
    live = topology.regions_with_servers()
    if not live:
        raise ConfigError("topology has no servers anywhere")
    wan = config.wan.build(topology.n_regions, topology.region_labels)
    model = config.server.build()
    engine = Engine(topology, wan, config.seed, server_model=model)
    collector = MetricsCollector(topology, warmup_s=config.warmup_s)
    engine.collector = collector

    proto_cls = protocol_class(config.protocol)
    replication = config.params.get("replicas", proto_cls.default_replication)
    placement = build_placement(config, topology, replication)
    protocol = create_protocol(
        config.protocol, engine, topology, placement, config.params
    )

    if config.workload.kind == "replay":
        txns = load_stream(config.workload.replay.path)
        engine.load_stream(iter(txns))
    else:
        wl_cfg = (
            config.workload.tpcc.build()
            if config.workload.kind == "tpcc"
            else config.workload.ycsb.build()
        )
        origin_weights = config.topology.region_weights
        if origin_weights is None and config.workload.kind == "ycsb":
            w = [1.0 / len(live) if r in live else 0.0 for r in range(topology.n_regions)]
            total = sum(w)
            origin_weights = [x / total for x in w]
        stream_seed = (
            config.workload_seed
            if config.workload_seed is not None
            else derive_seed(config.seed, "workload")
        )
        stream = WorkloadStream(
            config=wl_cfg,
            placement=placement,
            arrival=config.arrival.build(),
            duration_s=config.duration_s,
            seed=stream_seed,
            origin_weights=tuple(origin_weights) if origin_weights else None,
        )
        engine.load_stream(stream.transactions())

    engine.load_faults(config.fault_schedule(), config.duration_s)
    if placement.n_partitions:
        repl_factor = 1.0 + sum(len(r) for r in placement.replicas) / placement.n_partitions
    else:
        repl_factor = 1.0
    return RunContext(
        config=config,
        topology=topology,
        placement=placement,
        engine=engine,
        protocol=protocol,
        collector=collector,
        replication_factor=repl_factor,
    )


def _pricing(config: RunConfig) -> CostPricing:
    price = config.pricing.server_price_hr
    if price is None:
        if config.server.instance is not None:
            price = instance(config.server.instance).price_hr
        else:
            price = 1.120
    return CostPricing(
        server_price_hr=price,
        transfer_price_gb=config.pricing.transfer_price_gb,
        storage_price_gb_hr=config.pricing.storage_price_gb_hr,
    )


def run_single(
    config: RunConfig, label: dict | None = None, quiesce: bool = False
) -> RunReport:
    ctx = build_run(config, label)
    if quiesce:
        ctx.engine.quiesce()
        duration = max(config.duration_s, ctx.engine.now / 1e9)
    else:
        ctx.engine.run(config.duration_s)
        duration = config.duration_s
    return ctx.collector.finalize(
        ctx.engine,
        duration,
        pricing=_pricing(config),
        replication_factor=ctx.replication_factor,
        label=label or {},
    )


# -- scenario sweeps ------------------------------------------------------------


def apply_point(kind: str, base: RunConfig, value) -> RunConfig:
    """Produce the run config for one sweep point."""
    cfg = base.model_copy(deep=True)
    if kind == "throughput_ramp":
        cfg.arrival.rate_tps = float(value)
        cfg.arrival.mode = "open"
    elif kind == "resource_allocation":
        if value not in INSTANCE_CLASSES:
            raise ConfigError(f"unknown instance class {value!r}")
        cfg.server.instance = value
        cfg.wan.bandwidth_bytes_per_s = instance(value).bandwidth_bytes_per_s
    elif kind == "server_geo_distribution":
        if value not in GEO_DISTRIBUTIONS:
            raise ConfigError(
                f"unknown geo distribution {value!r}; rows: {', '.join(GEO_DISTRIBUTIONS)}"
            )
        weights = GEO_DISTRIBUTIONS[value]
        labels = cfg.topology.labels()
        if len(labels) != len(weights):
            raise ConfigError(
                f"geo distribution rows assume {len(weights)} regions, "
                f"topology has {len(labels)}"
            )
        spr = cfg.topology.servers_per_region
        total = (
            spr * len(labels) if isinstance(spr, int) else sum(spr)
        )
        cfg.topology.region_weights = list(weights)
        cfg.topology.servers_per_region = _distribute_servers(total, weights)
    elif kind == "access_patterns":
        geo = float(value)
        if cfg.workload.kind == "tpcc":
            tp = cfg.workload.tpcc
            share = tp.txn_mix[0] + tp.txn_mix[1]
            if not 0.0 <= geo <= share:
                raise ConfigError(
                    f"geo_pct {geo} outside [0, {share}] (structural ceiling)"
                )
            prob = min(1.0, geo / share) if share else 0.0
            tp.force_geo_prob = prob
            tp.payment_remote_prob = prob
        else:
            if not 0.0 <= geo <= 1.0:
                raise ConfigError("geo_pct must be in [0, 1] for YCSB")
            y = cfg.workload.ycsb
            y.lsh_pct = 1.0 - geo
            y.fsh_pct = geo / 2.0
            y.mh_pct = geo / 2.0
    elif kind == "access_skew":
        if cfg.workload.kind == "tpcc":
            pool = int(value)
            if pool < 1:
                raise ConfigError("pool size must be >= 1")
            cfg.workload.tpcc.item_pool = pool
            cfg.workload.tpcc.customer_pool = min(
                pool, cfg.workload.tpcc.customer_pool or 3000
            )
        else:
            theta = float(value)
            if not 0.0 <= theta <= 1.0:
                raise ConfigError("theta must be in [0, 1]")
            cfg.workload.ycsb.theta = theta
    elif kind == "latency_jitter":
        cfg.wan.path = None
        cfg.wan.rtt_ms = None
        cfg.wan.mean_rtt_ms = float(value)
    elif kind == "packet_loss":
        loss = float(value)
        if not 0.0 <= loss < 1.0:
            raise ConfigError("loss must be in [0, 1)")
        cfg.wan.loss_prob = loss
    elif kind == "fault_tolerance":
        from ..config import FaultItem

        target = str(value)
        cfg.faults = [
            FaultItem(time_s=FAULT_CRASH_S, target=target, action="crash"),
            FaultItem(time_s=FAULT_RECOVER_S, target=target, action="recover"),
        ]
        cfg.duration_s = max(cfg.duration_s, FAULT_DURATION_S)
    else:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    return cfg


def point_configs(spec: ScenarioSpec) -> list[tuple[dict, RunConfig]]:
    """Validate and materialize every sweep point up front (fail fast)."""
    shared_workload = spec.scenario in ("latency_jitter", "packet_loss")
    shared_seed = derive_seed(spec.base.seed, "workload")
    out = []
    for i, value in enumerate(spec.points()):
        for rep in range(spec.repetitions):
            try:
                cfg = apply_point(spec.scenario, spec.base, value)
                cfg.seed = derive_seed(spec.base.seed, spec.scenario, i, rep)
                if shared_workload and cfg.workload_seed is None:
                    cfg.workload_seed = shared_seed
                # full validation pass on the final point config
                cfg = RunConfig.model_validate(cfg.model_dump())
                build_run(cfg)  # raises on structurally impossible points
            except ConfigError as exc:
                raise ConfigError(
                    f"scenario {spec.scenario} point {i} (value={value!r}): {exc}"
                ) from exc
            label = {
                "scenario": spec.scenario,
                "protocol": cfg.protocol,
                "param": value,
                "rep": rep,
                "point": i,
            }
            out.append((label, cfg))
    return out


def _run_point(args) -> RunReport:
    label, cfg = args
    return run_single(cfg, label=label)


def run_scenario(
    spec: ScenarioSpec, workers: int = 1, point: Optional[int] = None
) -> list[RunReport]:
    """Execute a sweep; ``point`` restricts to a single axis index."""
    jobs = point_configs(spec)
    if point is not None:
        jobs = [j for j in jobs if j[0]["point"] == point]
        if not jobs:
            raise ConfigError(f"scenario has no point {point}")
    if workers <= 1 or len(jobs) == 1:
        return [_run_point(j) for j in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point, jobs))
