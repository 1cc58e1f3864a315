"""Run configuration schema (pydantic): validated before any run, unknown
keys rejected. A RunConfig fully determines a simulation; all randomness
flows from its single seed."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core import Topology, default_region_labels
from .errors import ConfigError
from .netsim.engine import FaultEntry, FaultSchedule, ServerModel
from .netsim.wan import DEFAULT_MEAN_RTT_MS, WanProfile
from .workload.tpcc import TpccConfig
from .workload.ycsb import YcsbConfig
from .workload.stream import ClosedArrival, OpenArrival

SCHEMA_VERSION = 1


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class YcsbSection(_Model):
    lsh_pct: float = 0.50
    fsh_pct: float = 0.25
    mh_pct: float = 0.25
    mp_pct: float = 0.50
    hot_keys_per_txn: int = 2
    cold_keys_per_txn: int = 8
    theta: float = 0.0
    hot_set_size: int = 100
    table_size: int = 100_000
    value_bytes: int = 1000
    read_fraction: float = 0.5
    mh_fanout: int = 2

    def build(self) -> YcsbConfig:
        return YcsbConfig(**self.model_dump())


class TpccSection(_Model):
    warehouses: int = 1200
    remote_prob: float = 0.01
    txn_mix: tuple[float, float, float, float, float] = (0.44, 0.44, 0.04, 0.04, 0.04)
    items_per_order: int = 10
    item_pool: Optional[int] = None
    customer_pool: Optional[int] = None
    value_bytes: int = 100
    force_geo_prob: Optional[float] = None
    payment_remote_prob: Optional[float] = None

    def build(self) -> TpccConfig:
        return TpccConfig(**self.model_dump())


class ReplaySection(_Model):
    path: str


class WorkloadSection(_Model):
    kind: Literal["ycsb", "tpcc", "replay"] = "ycsb"
    ycsb: Optional[YcsbSection] = None
    tpcc: Optional[TpccSection] = None
    replay: Optional[ReplaySection] = None

    @model_validator(mode="after")
    def _fill(self):
        if self.kind == "ycsb" and self.ycsb is None:
            object.__setattr__(self, "ycsb", YcsbSection())
        if self.kind == "tpcc" and self.tpcc is None:
            object.__setattr__(self, "tpcc", TpccSection())
        if self.kind == "replay" and self.replay is None:
            raise ValueError("replay workload needs a stream path")
        return self


class TopologySection(_Model):
    regions: Union[int, list[str]] = 4
    servers_per_region: Union[int, list[int]] = 2
    partitions: int = 64
    region_weights: Optional[list[float]] = None

    def labels(self) -> tuple[str, ...]:
        if isinstance(self.regions, int):
            return default_region_labels(self.regions)
        return tuple(self.regions)

    def build(self) -> Topology:
        labels = self.labels()
        spr = self.servers_per_region
        if isinstance(spr, int):
            spr = [spr] * len(labels)
        if len(spr) != len(labels):
            raise ConfigError("servers_per_region list must match region count")
        return Topology(tuple(labels), tuple(spr), self.partitions)


class WanSection(_Model):
    path: Optional[str] = None
    rtt_ms: Optional[list[list[float]]] = None
    mean_rtt_ms: Optional[float] = None  # synthetic matrix target mean
    jitter_fraction: float = 0.10
    loss_prob: float = 0.0
    bandwidth_bytes_per_s: Optional[float] = None

    def build(self, n_regions: int, labels: tuple[str, ...]) -> WanProfile:
        common = dict(
            jitter_fraction=self.jitter_fraction,
            loss_prob=self.loss_prob,
            bandwidth_bytes_per_s=self.bandwidth_bytes_per_s,
        )
        if self.path is not None:
            base = WanProfile.load(self.path)
            if base.n_regions != n_regions:
                raise ConfigError(
                    f"WAN file {self.path} covers {base.n_regions} regions, "
                    f"topology has {n_regions}"
                )
            return WanProfile(rtt_ms=base.rtt_ms, region_labels=labels, **common)
        if self.rtt_ms is not None:
            return WanProfile(
                rtt_ms=tuple(tuple(row) for row in self.rtt_ms),
                region_labels=labels,
                **common,
            )
        mean = self.mean_rtt_ms if self.mean_rtt_ms is not None else DEFAULT_MEAN_RTT_MS
        if mean <= 0:
            return WanProfile.uniform(n_regions, 0.0, region_labels=labels, **common)
        return WanProfile.synthetic_matrix(
            n_regions, mean_rtt_ms=mean, region_labels=labels, **common
        )


class ArrivalSection(_Model):
    mode: Literal["open", "closed"] = "open"
    rate_tps: float = 500.0
    spacing: Literal["fixed", "poisson"] = "fixed"
    clients: int = 40
    per_client_tps: float = 10.0

    def build(self):
        if self.mode == "open":
            return OpenArrival(rate_tps=self.rate_tps, spacing=self.spacing)
        return ClosedArrival(clients=self.clients, per_client_tps=self.per_client_tps)


class ServerSection(_Model):
    instance: Optional[str] = None
    executors: int = 2
    service_time_us: float = 20.0
    inflight_capacity: int = 100_000

    def build(self) -> ServerModel:
        service_ns = int(self.service_time_us * 1000)
        if self.instance is not None:
            from .scenarios.instances import instance

            return instance(self.instance).server_model(service_ns)
        return ServerModel(
            executors=self.executors,
            service_time_ns=service_ns,
            inflight_capacity=self.inflight_capacity,
        )


class PricingSection(_Model):
    server_price_hr: Optional[float] = None  # default: instance price or $1.120
    transfer_price_gb: float = 0.02
    storage_price_gb_hr: float = 0.0001


class FaultItem(_Model):
    time_s: float
    target: str  # "server:<region>:<idx>" or "region:<region>"
    action: Literal["crash", "recover"]

    def build(self) -> FaultEntry:
        parts = self.target.split(":")
        if parts[0] == "server" and len(parts) == 3:
            tgt = ("server", int(parts[1]), int(parts[2]))
        elif parts[0] == "region" and len(parts) == 2:
            tgt = ("region", int(parts[1]))
        else:
            raise ConfigError(f"bad fault target {self.target!r}")
        return FaultEntry(time_s=self.time_s, target=tgt, action=self.action)


class RunConfig(_Model):
    schema_version: int = SCHEMA_VERSION
    workload: WorkloadSection = Field(default_factory=WorkloadSection)
    topology: TopologySection = Field(default_factory=TopologySection)
    wan: WanSection = Field(default_factory=WanSection)
    arrival: ArrivalSection = Field(default_factory=ArrivalSection)
    server: ServerSection = Field(default_factory=ServerSection)
    pricing: PricingSection = Field(default_factory=PricingSection)
    protocol: str = "global_sequencer"
    params: dict = Field(default_factory=dict)
    duration_s: float = 60.0
    warmup_s: float = 15.0
    seed: int = 1
    # network-condition sweeps pin this so every point replays one workload
    workload_seed: Optional[int] = None
    faults: list[FaultItem] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {self.schema_version}; "
                f"this build reads version {SCHEMA_VERSION}"
            )
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if not 0 <= self.warmup_s < self.duration_s:
            raise ValueError("warmup_s must be in [0, duration_s)")
        return self

    def fault_schedule(self) -> FaultSchedule:
        return FaultSchedule(tuple(f.build() for f in self.faults))


def load_run_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_run_config(p.read_text(), source=str(p))


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: not valid JSON: {exc}") from exc
    try:
        return RunConfig.model_validate(obj)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def desk_config(workload: str = "ycsb", **overrides) -> RunConfig:
    """Small fast defaults: 4 regions x 2 servers, 64 partitions, 60 s."""
    cfg = RunConfig(
        workload=WorkloadSection(
            kind=workload,
            tpcc=TpccSection(warehouses=64) if workload == "tpcc" else None,
        ),
        topology=TopologySection(regions=4, servers_per_region=2, partitions=64),
    )
    return cfg.model_copy(update=overrides) if overrides else cfg


def paper_config(workload: str = "ycsb", **overrides) -> RunConfig:
    """Paper-scale preset: 8 regions x 4 servers, r5.4xlarge-class servers."""
    cfg = RunConfig(
        workload=WorkloadSection(
            kind=workload,
            tpcc=TpccSection(warehouses=1200) if workload == "tpcc" else None,
        ),
        topology=TopologySection(
            regions=8,
            servers_per_region=4,
            partitions=1200 if workload == "tpcc" else 256,
        ),
        server=ServerSection(instance="r5.4xlarge"),
        arrival=ArrivalSection(mode="open", rate_tps=2000.0),
    )
    return cfg.model_copy(update=overrides) if overrides else cfg
