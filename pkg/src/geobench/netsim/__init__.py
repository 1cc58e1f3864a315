from .wan import WanProfile
from .engine import (
    Engine,
    FaultSchedule,
    FaultEntry,
    Message,
    ServerModel,
    HEADER_BYTES,
    KEYREF_BYTES,
)

__all__ = [
    "WanProfile",
    "Engine",
    "FaultSchedule",
    "FaultEntry",
    "Message",
    "ServerModel",
    "HEADER_BYTES",
    "KEYREF_BYTES",
]
