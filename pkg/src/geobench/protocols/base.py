"""Protocol-model interface and shared plumbing.

A protocol model is a per-server state machine driven entirely by engine
callbacks (submit / message / timer / crash / recover). State is keyed by
server id and never shared across servers; all coordination flows through
messages. Each submitted transaction must receive at most one terminal
outcome, emitted via ``engine.emit``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..core import PlacementMap, Topology, Transaction, TxnClass
from ..netsim.engine import Engine, HEADER_BYTES, KEYREF_BYTES, Message

COMMITTED = "committed"
ABORTED = "aborted"
REJECTED = "rejected-overload"

CLIENT_TIMEOUT_NS = 10_000_000_000  # 10 s of simulated time
PARTICIPANT_TIMEOUT_NS = 5_000_000_000


@dataclass(slots=True)
class Outcome:
    txn_id: int
    verdict: str
    submit_time: int
    commit_time: int
    txn_class: TxnClass | None = None
    reason: str | None = None
    commit_position: tuple | int | None = None
    origin: int = 0

    def __post_init__(self):
        if self.commit_time < self.submit_time:
            raise ValueError("commit_time precedes submit_time")


def message_bytes(n_keys: int, payload_bytes: int = 0) -> int:
    """Wire size model: fixed header, 32 B per key reference, plus any
    carried write payload."""
    return HEADER_BYTES + KEYREF_BYTES * n_keys + payload_bytes


def write_payload(txn: Transaction) -> int:
    return len(txn.write_set) * txn.value_bytes


class Store:
    """Per-server committed state: key -> (writer txn id, commit position).

    Writes apply last-writer-wins by commit position, so replicas converge
    to the same final state regardless of message arrival order.
    """

    __slots__ = ("data",)

    def __init__(self):
        self.data: dict[tuple[int, int], tuple[int, Any]] = {}

    def apply(self, write_set, txn_id: int, position) -> None:
        data = self.data
        for ref in write_set:
            cur = data.get(ref)
            if cur is None or cur[1] < position:
                data[ref] = (txn_id, position)

    def partition_view(self, partition: int) -> dict:
        return {k: v for k, v in self.data.items() if k[0] == partition}

    def merge(self, other: "Store") -> None:
        for ref, (tid, pos) in other.data.items():
            cur = self.data.get(ref)
            if cur is None or cur[1] < pos:
                self.data[ref] = (tid, pos)

    def clear(self) -> None:
        self.data.clear()


class FifoChannel:
    """Reorder buffer restoring per-channel FIFO over a jittery link.

    The sender stamps consecutive sequence numbers; ``push`` returns the
    items that became deliverable in order.
    """

    __slots__ = ("next_seq", "pending")

    def __init__(self):
        self.next_seq = 0
        self.pending: dict[int, Any] = {}

    def push(self, seq: int, item) -> list:
        self.pending[seq] = item
        ready = []
        while self.next_seq in self.pending:
            ready.append(self.pending.pop(self.next_seq))
            self.next_seq += 1
        return ready

    def reset(self) -> None:
        self.next_seq = 0
        self.pending.clear()


class ProtocolModel:
    """Base class; subclasses implement the callbacks they need."""

    name = "abstract"
    default_replication: int | str = 0

    def __init__(
        self,
        engine: Engine,
        topology: Topology,
        placement: PlacementMap,
        params: dict | None = None,
    ):
        self.engine = engine
        self.topology = topology
        self.placement = placement
        self.params = params or {}
        self.client_timeout_ns = int(
            self.params.get("client_timeout_ns", CLIENT_TIMEOUT_NS)
        )
        self.stores: dict[int, Store] = {}
        # in-flight coordination state is RAM: a client-facing server stops
        # admitting once its pending-transaction count hits the capacity proxy
        self.admission_limit = int(
            self.params.get("admission_limit", engine.model.inflight_capacity)
        )
        self._coord_inflight: dict[int, int] = {}

    # -- helpers ----------------------------------------------------------

    def client_server(self, txn: Transaction) -> int:
        """The client-facing server in the transaction's origin region."""
        servers = self.topology.servers_in(txn.origin)
        if not servers:
            raise ValueError(f"origin region {txn.origin} has no servers")
        return servers[txn.id % len(servers)]

    def store(self, sid: int) -> Store:
        st = self.stores.get(sid)
        if st is None:
            st = self.stores[sid] = Store()
        return st

    def admit(self, osid: int) -> bool:
        count = self._coord_inflight.get(osid, 0)
        if count >= self.admission_limit:
            return False
        self._coord_inflight[osid] = count + 1
        return True

    def release(self, osid: int) -> None:
        count = self._coord_inflight.get(osid, 0)
        if count > 0:
            self._coord_inflight[osid] = count - 1

    def reset_admission(self, sid: int) -> None:
        self._coord_inflight[sid] = 0

    def reject(self, txn: Transaction, now: int, reason: str) -> None:
        self.engine.emit(
            Outcome(
                txn_id=txn.id,
                verdict=REJECTED,
                submit_time=txn.submit_time,
                commit_time=now,
                txn_class=txn.txn_class,
                reason=reason,
                origin=txn.origin,
            ),
            txn,
        )

    def send(self, src: int, dst: int, tag: str, nbytes: int, body=None) -> None:
        self.engine.send(Message(src=src, dst=dst, tag=tag, bytes=nbytes, body=body))

    # -- callbacks ---------------------------------------------------------

    def on_submit(self, txn: Transaction, now: int) -> None:
        raise NotImplementedError

    def on_message(self, msg: Message, now: int) -> None:
        raise NotImplementedError

    def on_timer(self, sid: int, tag, now: int) -> None:
        pass

    def on_crash(self, sid: int, now: int) -> None:
        pass

    def on_recover(self, sid: int, now: int) -> None:
        pass
