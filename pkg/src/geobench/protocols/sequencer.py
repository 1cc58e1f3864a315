"""Globally-sequenced deterministic protocol over full replication.

Every transaction is forwarded to one distinguished sequencer server,
receives the next global sequence number, and is broadcast to the hosting
shard servers in every region. Execution applies writes last-writer-wins
by sequence number, so all copies converge to the serial order's final
state. The origin region's shard servers report completion to the
client-facing server, which emits the outcome.

No commit-time coordination: the protocol never aborts. If the sequencer
(or any link on the path) is unavailable, submissions simply time out.
"""

from __future__ import annotations

from ..core import Transaction
from ..netsim.engine import Message
from .base import (
    COMMITTED,
    REJECTED,
    Outcome,
    ProtocolModel,
    message_bytes,
    write_payload,
)

_SYNC_VALUE_BYTES = 100  # per-entry payload estimate for recovery transfers


class GlobalSequencer(ProtocolModel):
    name = "global_sequencer"
    default_replication = "full"

    def __init__(self, engine, topology, placement, params=None):
        super().__init__(engine, topology, placement, params)
        live = topology.regions_with_servers()
        seq_region = int(self.params.get("sequencer_region", live[0]))
        self.seq_sid = topology.servers_in(seq_region)[0]
        self.next_pos = 0  # modeled as durable (sequencer log)
        # txn_id -> (txn, osid, expected origin-region completions, got)
        self.pending: dict[int, list] = {}
        # (sid, txn_id) -> (txn, pos, local refs)
        self.executing: dict[tuple[int, int], tuple] = {}

    # -- shard helpers -----------------------------------------------------

    def _involved(self, region: int, txn: Transaction) -> list[int]:
        topo = self.topology
        return sorted({topo.shard_server(region, p) for p in txn.partitions()})

    def _local_refs(self, sid: int, txn: Transaction):
        topo = self.topology
        region = topo.region_of(sid)
        reads = [r for r in txn.read_set if topo.shard_server(region, r[0]) == sid]
        writes = [r for r in txn.write_set if topo.shard_server(region, r[0]) == sid]
        return reads, writes

    # -- callbacks ----------------------------------------------------------

    def on_submit(self, txn: Transaction, now: int) -> None:
        up = [s for s in self.topology.servers_in(txn.origin) if self.engine.servers[s].up]
        if not up:
            self.reject(txn, now, "origin-region-down")
            return
        osid = up[txn.id % len(up)]
        if not self.admit(osid):
            self.reject(txn, now, "admission-limit")
            return
        self.pending[txn.id] = [txn, osid, len(self._involved(txn.origin, txn)), 0]
        self.engine.set_timer(osid, self.client_timeout_ns, ("ctimeout", txn.id))
        self.send(
            osid,
            self.seq_sid,
            "order",
            message_bytes(txn.op_count, write_payload(txn)),
            body=(txn, osid),
        )

    def on_message(self, msg: Message, now: int) -> None:
        if msg.tag == "order":
            txn, osid = msg.body
            pos = self.next_pos
            self.next_pos += 1
            size = message_bytes(txn.op_count, write_payload(txn))
            for region in self.topology.regions_with_servers():
                for sid in self._involved(region, txn):
                    self.send(self.seq_sid, sid, "ordered", size, body=(txn, pos, osid))
        elif msg.tag == "ordered":
            txn, pos, osid = msg.body
            sid = msg.dst
            reads, writes = self._local_refs(sid, txn)
            ops = len(reads) + len(writes)
            self.executing[(sid, txn.id)] = (txn, pos, writes, osid)
            if ops and not self.engine.service(sid, ops, ("exec", txn.id)):
                del self.executing[(sid, txn.id)]  # overloaded; client times out
        elif msg.tag == "done":
            txn_id, pos = msg.body
            entry = self.pending.get(txn_id)
            if entry is None or entry[1] != msg.dst:
                return
            entry[3] += 1
            if entry[3] >= entry[2]:
                txn = entry[0]
                del self.pending[txn_id]
                self.release(entry[1])
                self.engine.emit(
                    Outcome(
                        txn_id=txn_id,
                        verdict=COMMITTED,
                        submit_time=txn.submit_time,
                        commit_time=now,
                        txn_class=txn.txn_class,
                        commit_position=pos,
                        origin=txn.origin,
                    ),
                    txn,
                )
        elif msg.tag == "sync_req":
            donor_state = self.store(msg.dst).data
            size = message_bytes(len(donor_state), len(donor_state) * _SYNC_VALUE_BYTES)
            self.send(msg.dst, msg.src, "sync_state", size, body=dict(donor_state))
        elif msg.tag == "sync_state":
            target = self.store(msg.dst)
            for ref, (tid, pos) in msg.body.items():
                cur = target.data.get(ref)
                if cur is None or cur[1] < pos:
                    target.data[ref] = (tid, pos)

    def on_timer(self, sid: int, tag, now: int) -> None:
        if tag[0] == "exec":
            entry = self.executing.pop((sid, tag[1]), None)
            if entry is None:
                return
            txn, pos, writes, osid = entry
            if writes:
                self.store(sid).apply(writes, txn.id, pos)
            if self.topology.region_of(sid) == txn.origin:
                self.send(sid, osid, "done", message_bytes(0), body=(txn.id, pos))
        elif tag[0] == "ctimeout":
            entry = self.pending.pop(tag[1], None)
            if entry is not None:
                self.release(entry[1])
                self.reject(entry[0], now, "client-timeout")

    def on_crash(self, sid: int, now: int) -> None:
        self.pending = {t: e for t, e in self.pending.items() if e[1] != sid}
        self.executing = {k: v for k, v in self.executing.items() if k[0] != sid}
        self.reset_admission(sid)
        if sid in self.stores:
            self.stores[sid].clear()

    def on_recover(self, sid: int, now: int) -> None:
        # restore the local copy from a peer hosting the same shards
        topo = self.topology
        region = topo.region_of(sid)
        idx = sid - topo.servers_in(region)[0]
        for r in topo.regions_with_servers():
            if r == region or topo.servers_per_region[r] != topo.servers_per_region[region]:
                continue
            donor = topo.servers_in(r)[idx]
            if self.engine.servers[donor].up:
                self.send(sid, donor, "sync_req", message_bytes(0))
                return
