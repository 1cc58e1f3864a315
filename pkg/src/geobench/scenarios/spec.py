"""The eight evaluation scenarios as config-driven sweeps."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..config import RunConfig
from ..errors import ConfigError

ScenarioKind = Literal[
    "throughput_ramp",
    "resource_allocation",
    "server_geo_distribution",
    "access_patterns",
    "access_skew",
    "latency_jitter",
    "packet_loss",
    "fault_tolerance",
]

# Server/data/client weight rows for the geo-distribution scenario
# (four regions: US West, US East, EU West, AP NorthEast).
GEO_DISTRIBUTIONS: dict[str, tuple[float, float, float, float]] = {
    "uniform": (0.25, 0.25, 0.25, 0.25),
    "usw+": (0.375, 0.25, 0.25, 0.125),
    "usw+eu+": (0.375, 0.125, 0.375, 0.125),
    "usw++": (0.625, 0.125, 0.125, 0.125),
    "usw++eu++": (0.50, 0.0, 0.50, 0.0),
}

DEFAULT_AXES: dict[str, list] = {
    "throughput_ramp": [200, 500, 1000, 2000, 4000, 8000],
    "resource_allocation": [
        "m5.2xlarge",
        "r5.2xlarge",
        "m5.4xlarge",
        "r5.4xlarge",
        "m6i.8xlarge",
    ],
    "server_geo_distribution": list(GEO_DISTRIBUTIONS),
    "access_patterns": [round(0.1 * i, 2) for i in range(11)],
    "access_skew": [0.0, 0.25, 0.5, 0.75, 0.9, 0.99],
    "latency_jitter": [0, 50, 111, 200, 400, 600],
    "packet_loss": [0.0, 0.01, 0.02, 0.05, 0.10],
    "fault_tolerance": ["server:0:0", "region:0"],
}

# Fault-trace timing: warm up, kill at 15 s, restart at 45 s, end at 75 s.
FAULT_CRASH_S = 15.0
FAULT_RECOVER_S = 45.0
FAULT_DURATION_S = 75.0


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioKind
    base: RunConfig = Field(default_factory=RunConfig)
    axis: Optional[list] = None
    repetitions: int = 1

    def points(self) -> list:
        axis = self.axis if self.axis is not None else DEFAULT_AXES[self.scenario]
        if not axis:
            raise ConfigError("scenario axis must be non-empty")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        return list(axis)


def load_scenario(path: str | Path) -> ScenarioSpec:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"scenario file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON: {exc}") from exc
    try:
        return ScenarioSpec.model_validate(obj)
    except ValidationError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
