"""No-op reference protocol: commits everything after one local service
step. Useful for plumbing checks and as the minimal integration example."""

from __future__ import annotations

from ..core import Transaction
from .base import COMMITTED, REJECTED, Outcome, ProtocolModel


class Echo(ProtocolModel):
    name = "echo"
    default_replication = 0

    def __init__(self, engine, topology, placement, params=None):
        super().__init__(engine, topology, placement, params)
        self.next_pos = 0
        self.executing: dict[tuple[int, int], Transaction] = {}

    def on_submit(self, txn: Transaction, now: int) -> None:
        up = [s for s in self.topology.servers_in(txn.origin) if self.engine.servers[s].up]
        if not up:
            return
        sid = up[txn.id % len(up)]
        if not self.admit(sid):
            self.reject(txn, now, "admission-limit")
            return
        self.executing[(sid, txn.id)] = txn
        if not self.engine.service(sid, txn.op_count, ("echo", txn.id)):
            del self.executing[(sid, txn.id)]
            self.release(sid)
            self.reject(txn, now, "overload")

    def on_message(self, msg, now):  # pragma: no cover - echo never sends
        pass

    def on_timer(self, sid: int, tag, now: int) -> None:
        if tag[0] != "echo":
            return
        txn = self.executing.pop((sid, tag[1]), None)
        if txn is None:
            return
        self.release(sid)
        self.next_pos += 1
        if txn.write_set:
            self.store(sid).apply(txn.write_set, txn.id, self.next_pos)
        self.engine.emit(
            Outcome(
                txn_id=txn.id,
                verdict=COMMITTED,
                submit_time=txn.submit_time,
                commit_time=now,
                txn_class=txn.txn_class,
                commit_position=self.next_pos,
                origin=txn.origin,
            ),
            txn,
        )
