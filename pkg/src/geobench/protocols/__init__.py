"""Protocol registry: models are selectable by name in run configs."""

from __future__ import annotations

from typing import Callable, Type

from ..errors import ConfigError, RegistrationError
from .base import (
    ABORTED,
    COMMITTED,
    REJECTED,
    Outcome,
    ProtocolModel,
    Store,
    message_bytes,
)
from .echo import Echo
from .home_aware import HomeAware
from .quorum import QuorumCommit
from .sequencer import GlobalSequencer

_REGISTRY: dict[str, Type[ProtocolModel]] = {}


def register(cls: Type[ProtocolModel]) -> Type[ProtocolModel]:
    name = cls.name
    if name in _REGISTRY:
        raise RegistrationError(f"protocol {name!r} is already registered")
    _REGISTRY[name] = cls
    return cls


def unregister(name: str) -> None:
    _REGISTRY.pop(name, None)


def available() -> list[str]:
    return sorted(_REGISTRY)


def protocol_class(name: str) -> Type[ProtocolModel]:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown protocol {name!r}; available: {', '.join(available())}"
        ) from None


def create(name: str, engine, topology, placement, params=None) -> ProtocolModel:
    cls = protocol_class(name)
    proto = cls(engine, topology, placement, params)
    engine.attach(proto, engine.collector)
    return proto


for _cls in (GlobalSequencer, HomeAware, QuorumCommit, Echo):
    register(_cls)

__all__ = [
    "ProtocolModel",
    "Outcome",
    "Store",
    "COMMITTED",
    "ABORTED",
    "REJECTED",
    "GlobalSequencer",
    "HomeAware",
    "QuorumCommit",
    "Echo",
    "register",
    "unregister",
    "available",
    "protocol_class",
    "create",
    "message_bytes",
]
