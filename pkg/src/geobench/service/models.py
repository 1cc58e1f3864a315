"""Request/response models for the benchmark service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import RunConfig, TopologySection, WorkloadSection
from ..scenarios.spec import ScenarioSpec


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GenerateRequest(_Model):
    workload: WorkloadSection = Field(default_factory=WorkloadSection)
    topology: TopologySection = Field(default_factory=TopologySection)
    count: int = 10_000
    seed: int = 1
    include: int = 0  # transactions echoed back inline (capped)

    @model_validator(mode="after")
    def _check(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0 <= self.include <= 10_000:
            raise ValueError("include must be in [0, 10000]")
        return self


class GenerateResponse(_Model):
    count: int
    composition_pct: dict[str, float]
    type_mix_pct: dict[str, float]
    stream_sha256: str
    placement: dict
    transactions: list[dict] = Field(default_factory=list)


class ClassifyRequest(_Model):
    placement: dict
    transactions: list[dict]


class ClassifyResponse(_Model):
    classes: list[str]
    composition_pct: dict[str, float]
    mismatches: int


class CostRequest(_Model):
    n_servers: int
    server_price_hr: float
    transfer_gb_per_hr: float = 0.0
    transfer_price_gb: float = 0.02
    storage_gb: float = 0.0
    storage_price_gb_hr: float = 0.0001
    throughput_tps: float


class CostResponse(_Model):
    fixed_per_txn: float | None
    transfer_per_txn: float | None
    total_per_txn: float | None
    infinite: bool
    cents_per_10k: float | None
    note: Optional[str] = None


class RunRequest(_Model):
    config: Optional[RunConfig] = None
    scenario: Optional[ScenarioSpec] = None
    point: Optional[int] = None
    workers: int = 1

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.config is None) == (self.scenario is None):
            raise ValueError("provide exactly one of config or scenario")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        return self


class JobInfo(_Model):
    job_id: str
    status: str  # queued | running | done | error
    error: Optional[str] = None
    n_reports: int = 0


class JobResult(JobInfo):
    reports: list[dict] = Field(default_factory=list)


class ProtocolList(_Model):
    protocols: list[str]


class Health(_Model):
    status: str
    version: str
