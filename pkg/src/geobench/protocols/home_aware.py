"""Home-aware deterministic protocol (regional logs + a global orderer).

Single-home transactions are ordered and executed entirely inside their
home region's log; a foreign single-home transaction is forwarded to the
home region and its result returned directly to the origin server, costing
one WAN round trip. Multi-home transactions go through a global orderer
that assigns a global index and dispatches per-region fragments over
FIFO channels, so every regional log interleaves multi-home entries in
global order.

Because the global order fixes the outcome deterministically, the origin
acknowledges a multi-home commit as soon as it holds the global index and
its own region's fragment has executed; remote fragments complete
asynchronously. Log positions map to a single scalar (global index times a
large stride for multi-home entries, small per-region counters otherwise),
giving a replay order that agrees with every regional log on conflicting
transactions.
"""

from __future__ import annotations

from ..core import Transaction
from ..netsim.engine import Message
from .base import (
    COMMITTED,
    REJECTED,
    FifoChannel,
    Outcome,
    ProtocolModel,
    message_bytes,
    write_payload,
)

GLOBAL_STRIDE = 10**9


class HomeAware(ProtocolModel):
    name = "home_aware"
    default_replication = 0  # primary-copy only, like the fastest variant

    def __init__(self, engine, topology, placement, params=None):
        super().__init__(engine, topology, placement, params)
        live = topology.regions_with_servers()
        self.orderer_region = int(self.params.get("orderer_region", live[0]))
        self.orderer = topology.servers_in(self.orderer_region)[0]
        self.leaders = {r: topology.servers_in(r)[0] for r in live}
        missing = set(placement.homes) - set(live)
        if missing:
            from ..errors import ConfigError

            raise ConfigError(
                f"placement homes partitions in server-less regions {sorted(missing)}"
            )
        # durable regional log state (survives crashes, like a replicated log)
        self.log_scalar = {r: 0 for r in live}
        self.global_pos = 0
        self.chan_out = {r: 0 for r in live}  # orderer->leader send seq
        self.chan_in = {r: FifoChannel() for r in live}
        # txn_id -> [txn, osid, want_frags, got_frags, want_ack, got_ack, pos]
        self.pending: dict[int, list] = {}
        self.executing: dict[tuple[int, int], tuple] = {}

    # -- helpers -------------------------------------------------------------

    def _regions_of(self, txn: Transaction) -> frozenset[int]:
        homes = self.placement.homes
        return frozenset(homes[p] for p in txn.partitions())

    def _frag_servers(self, region: int, txn: Transaction) -> list[int]:
        topo = self.topology
        homes = self.placement.homes
        return sorted(
            {
                topo.shard_server(region, p)
                for p in txn.partitions()
                if homes[p] == region
            }
        )

    def _frag_refs(self, sid: int, txn: Transaction):
        topo = self.topology
        homes = self.placement.homes
        region = topo.region_of(sid)
        reads = [
            r
            for r in txn.read_set
            if homes[r[0]] == region and topo.shard_server(region, r[0]) == sid
        ]
        writes = [
            r
            for r in txn.write_set
            if homes[r[0]] == region and topo.shard_server(region, r[0]) == sid
        ]
        return reads, writes

    def _emit_if_complete(self, txn_id: int, now: int) -> None:
        entry = self.pending.get(txn_id)
        if entry is None:
            return
        txn, osid, want_frags, got_frags, want_ack, got_ack, pos = entry
        if got_frags >= want_frags and got_ack >= want_ack:
            del self.pending[txn_id]
            self.release(osid)
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

    def _log_insert(self, region: int, floor: int) -> int:
        s = max(self.log_scalar[region] + 1, floor)
        self.log_scalar[region] = s
        return s

    def _dispatch_frags(
        self, leader: int, region: int, txn: Transaction, scalar: int, reply_to: int | None
    ) -> None:
        size = message_bytes(txn.op_count, write_payload(txn))
        for sid in self._frag_servers(region, txn):
            self.send(leader, sid, "frag", size, body=(txn, scalar, reply_to))

    # -- callbacks -------------------------------------------------------------

    def on_submit(self, txn: Transaction, now: int) -> None:
        up = [s for s in self.topology.servers_in(txn.origin) if self.engine.servers[s].up]
        if not up:
            self.reject(txn, now, "origin-region-down")
            return
        osid = up[txn.id % len(up)]
        if not self.admit(osid):
            self.reject(txn, now, "admission-limit")
            return
        regions = self._regions_of(txn)
        size = message_bytes(txn.op_count, write_payload(txn))
        if len(regions) == 1:
            home = next(iter(regions))
            self.pending[txn.id] = [
                txn,
                osid,
                len(self._frag_servers(home, txn)),
                0,
                0,
                0,
                None,
            ]
            self.send(osid, self.leaders[home], "local", size, body=(txn, osid))
        else:
            want_frags = (
                len(self._frag_servers(txn.origin, txn)) if txn.origin in regions else 0
            )
            self.pending[txn.id] = [txn, osid, want_frags, 0, 1, 0, None]
            self.send(osid, self.orderer, "mh_order", size, body=(txn, osid))
        self.engine.set_timer(osid, self.client_timeout_ns, ("ctimeout", txn.id))

    def on_message(self, msg: Message, now: int) -> None:
        tag = msg.tag
        if tag == "local":
            txn, osid = msg.body
            region = self.topology.region_of(msg.dst)
            scalar = self._log_insert(region, 0)
            self._dispatch_frags(msg.dst, region, txn, scalar, osid)
        elif tag == "mh_order":
            txn, osid = msg.body
            self.global_pos += 1
            scalar = self.global_pos * GLOBAL_STRIDE
            size = message_bytes(txn.op_count, write_payload(txn))
            for region in sorted(self._regions_of(txn)):
                if region not in self.leaders:
                    continue
                seq = self.chan_out[region]
                self.chan_out[region] = seq + 1
                # only the origin region's fragments report back to the client
                reply = osid if region == txn.origin else None
                self.send(
                    self.orderer,
                    self.leaders[region],
                    "mh_dispatch",
                    size,
                    body=(txn, scalar, seq, reply),
                )
            self.send(self.orderer, osid, "mh_ack", message_bytes(0), body=(txn.id, scalar))
        elif tag == "mh_dispatch":
            txn, scalar, seq, reply = msg.body
            region = self.topology.region_of(msg.dst)
            ready = self.chan_in[region].push(seq, (txn, scalar, reply))
            for ready_txn, ready_scalar, ready_reply in ready:
                s = self._log_insert(region, ready_scalar)
                self._dispatch_frags(msg.dst, region, ready_txn, s, ready_reply)
        elif tag == "frag":
            txn, scalar, reply = msg.body
            sid = msg.dst
            reads, writes = self._frag_refs(sid, txn)
            ops = len(reads) + len(writes)
            self.executing[(sid, txn.id)] = (txn, scalar, writes, reply)
            if ops and not self.engine.service(sid, ops, ("exec", txn.id)):
                del self.executing[(sid, txn.id)]
        elif tag == "frag_done":
            txn_id, scalar = msg.body
            entry = self.pending.get(txn_id)
            if entry is None or entry[1] != msg.dst:
                return
            entry[3] += 1
            if entry[6] is None:
                entry[6] = scalar
            self._emit_if_complete(txn_id, now)
        elif tag == "mh_ack":
            txn_id, scalar = msg.body
            entry = self.pending.get(txn_id)
            if entry is None or entry[1] != msg.dst:
                return
            entry[5] += 1
            entry[6] = scalar
            self._emit_if_complete(txn_id, now)

    def on_timer(self, sid: int, tag, now: int) -> None:
        if tag[0] == "exec":
            entry = self.executing.pop((sid, tag[1]), None)
            if entry is None:
                return
            txn, scalar, writes, reply = entry
            if writes:
                self.store(sid).apply(writes, txn.id, scalar)
            if reply is not None:
                self.send(sid, reply, "frag_done", message_bytes(0), body=(txn.id, scalar))
        elif tag[0] == "ctimeout":
            entry = self.pending.pop(tag[1], None)
            if entry is not None:
                self.release(entry[1])
                self.reject(entry[0], now, "client-timeout")

    def on_crash(self, sid: int, now: int) -> None:
        self.pending = {t: e for t, e in self.pending.items() if e[1] != sid}
        self.executing = {k: v for k, v in self.executing.items() if k[0] != sid}
        self.reset_admission(sid)
        # no replicas to restore from: primary-copy data on this server is lost
        if sid in self.stores:
            self.stores[sid].clear()
