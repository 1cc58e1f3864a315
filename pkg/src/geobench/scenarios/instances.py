"""Cloud VM instance classes used by the resource-allocation scenario.

Simulation mapping: executors = vCPUs, in-flight capacity = 1000 x GiB of
RAM, and the network figure becomes the per-link bandwidth cap when the
scenario enables it. All linear, all overridable in config.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from ..netsim.engine import ServerModel


@dataclass(frozen=True)
class InstanceClass:
    name: str
    vcpus: int
    memory_gib: int
    network_gib_s: float
    price_hr: float

    def __post_init__(self):
        if min(self.vcpus, self.memory_gib) < 1 or self.network_gib_s <= 0:
            raise ConfigError(f"instance {self.name}: resources must be positive")
        if self.price_hr <= 0:
            raise ConfigError(f"instance {self.name}: price must be positive")

    def server_model(self, service_time_ns: int) -> ServerModel:
        return ServerModel(
            executors=self.vcpus,
            service_time_ns=service_time_ns,
            inflight_capacity=1000 * self.memory_gib,
        )

    @property
    def bandwidth_bytes_per_s(self) -> float:
        return self.network_gib_s * 2**30


INSTANCE_CLASSES = {
    c.name: c
    for c in (
        InstanceClass("m5.2xlarge", 8, 32, 10.0, 0.448),
        InstanceClass("r5.2xlarge", 8, 64, 10.0, 0.560),
        InstanceClass("m5.4xlarge", 16, 64, 10.0, 0.896),
        InstanceClass("r5.4xlarge", 16, 128, 10.0, 1.120),
        InstanceClass("m6i.8xlarge", 32, 128, 12.5, 1.792),
    )
}


def instance(name: str) -> InstanceClass:
    try:
        return INSTANCE_CLASSES[name]
    except KeyError:
        raise ConfigError(
            f"unknown instance class {name!r}; known: {', '.join(sorted(INSTANCE_CLASSES))}"
        ) from None
