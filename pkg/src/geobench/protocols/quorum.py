"""Fault-tolerant quorum-commit protocol (synchronous replication + 2PC).

The origin-region server coordinates: it asks every involved partition's
home server to lock the touched keys (reader/writer locks, wound-wait by
transaction id: the younger transaction always loses a conflict). Once a
home holds its locks it executes, replicates write intents to the
partition's replica servers, and votes after a majority of the replica
group acknowledges. The coordinator commits once every home voted; commit
records go to the homes and the replicas, so a committed write survives
any single server crash. A recovering server restores its partitions from
live group members before accepting new work.

Blocked transactions resolve through timers: participants abandon a
transaction whose decision never arrives, and the client gives up after
the configured timeout.
"""

from __future__ import annotations

from collections import deque

from ..core import Transaction
from ..netsim.engine import Message
from .base import (
    ABORTED,
    COMMITTED,
    PARTICIPANT_TIMEOUT_NS,
    REJECTED,
    Outcome,
    ProtocolModel,
    message_bytes,
)

# a home may unilaterally abort any transaction it has not voted for yet
WOUNDABLE = ("locking", "executing", "replicating")


class _Part:
    """Participant-side record of one transaction at one home server."""

    __slots__ = (
        "txn",
        "coord",
        "reads",
        "writes",
        "pending",
        "modes",
        "phase",
        "ack_need",
        "ack_got",
        "intent_servers",
    )

    def __init__(self, txn, coord, reads, writes):
        self.txn = txn
        self.coord = coord
        self.reads = reads
        self.writes = writes
        self.modes = {}
        for ref in reads:
            self.modes[ref] = "r"
        for ref in writes:
            self.modes[ref] = "w"  # read+write keys lock exclusively
        self.pending = set(self.modes)
        self.phase = "locking"
        self.ack_need: dict[int, int] = {}
        self.ack_got: dict[int, int] = {}
        self.intent_servers: list[int] = []


class _Coord:
    __slots__ = ("txn", "osid", "waiting", "homes")

    def __init__(self, txn, osid, homes):
        self.txn = txn
        self.osid = osid
        self.homes = homes  # sid -> (reads, writes)
        self.waiting = set(homes)


class QuorumCommit(ProtocolModel):
    name = "quorum_commit"
    default_replication = 2  # three-way groups, replicas in foreign regions

    def __init__(self, engine, topology, placement, params=None):
        super().__init__(engine, topology, placement, params)
        self.participant_timeout_ns = int(
            self.params.get("participant_timeout_ns", PARTICIPANT_TIMEOUT_NS)
        )
        # per home server: key -> [writer txn, reader set, wait deque]
        self.locks: dict[int, dict] = {}
        self.part: dict[tuple[int, int], _Part] = {}
        self.coord: dict[int, _Coord] = {}
        # replica-side write intents: (sid, txn_id) -> refs
        self.intents: dict[tuple[int, int], tuple] = {}
        # recovering servers: sid -> {"parts": set, "buffer": [msgs]}
        self.syncing: dict[int, dict] = {}

    # -- placement helpers ---------------------------------------------------

    def _home_sid(self, partition: int) -> int:
        return self.topology.shard_server(self.placement.homes[partition], partition)

    def _replica_sids(self, partition: int) -> list[int]:
        return [
            self.topology.shard_server(r, partition)
            for r in self.placement.replicas[partition]
            if self.topology.servers_per_region[r]
        ]

    def _split_by_home(self, txn: Transaction) -> dict[int, tuple[list, list]]:
        out: dict[int, tuple[list, list]] = {}
        for ref in txn.read_set:
            out.setdefault(self._home_sid(ref[0]), ([], []))[0].append(ref)
        for ref in txn.write_set:
            out.setdefault(self._home_sid(ref[0]), ([], []))[1].append(ref)
        return out

    # -- lock table ------------------------------------------------------------

    def _lock_state(self, sid: int, key) -> list:
        table = self.locks.setdefault(sid, {})
        st = table.get(key)
        if st is None:
            st = table[key] = [None, set(), deque()]
        return st

    def _conflicts(self, st, txn_id: int, mode: str) -> set[int]:
        writer, readers, _ = st
        out = set()
        if writer is not None and writer != txn_id:
            out.add(writer)
        if mode == "w":
            out.update(r for r in readers if r != txn_id)
        return out

    def _grant(self, st, txn_id: int, mode: str) -> None:
        if mode == "w":
            st[0] = txn_id
        else:
            st[1].add(txn_id)

    def _try_acquire(self, sid: int, txn_id: int, key, mode: str, now: int) -> str:
        """Returns granted / queued / refused (wound-wait by txn id)."""
        st = self._lock_state(sid, key)
        conflicts = self._conflicts(st, txn_id, mode)
        if not conflicts:
            self._grant(st, txn_id, mode)
            return "granted"
        if min(conflicts) < txn_id:
            return "refused"  # older holder wins; the younger requester aborts
        for holder in sorted(conflicts):
            rec = self.part.get((sid, holder))
            if rec is not None and rec.phase in WOUNDABLE:
                self._abort_local(sid, holder, now, wound=True)
        conflicts = self._conflicts(st, txn_id, mode)
        if not conflicts:
            self._grant(st, txn_id, mode)
            return "granted"
        st[2].append((txn_id, mode))
        return "queued"

    def _release_locks(self, sid: int, rec: _Part, now: int) -> None:
        table = self.locks.get(sid, {})
        freed = []
        txn_id = rec.txn.id
        for key, mode in rec.modes.items():
            if key in rec.pending:
                st = table.get(key)
                if st is not None:
                    st[2] = deque((t, m) for t, m in st[2] if t != txn_id)
                continue
            st = table.get(key)
            if st is None:
                continue
            if mode == "w":
                if st[0] == txn_id:
                    st[0] = None
            else:
                st[1].discard(txn_id)
            freed.append(key)
        for key in freed:
            self._pump_queue(sid, key, now)

    def _pump_queue(self, sid: int, key, now: int) -> None:
        st = self.locks.get(sid, {}).get(key)
        if st is None:
            return
        while st[2]:
            txn_id, mode = st[2][0]
            rec = self.part.get((sid, txn_id))
            if rec is None:
                st[2].popleft()
                continue
            if self._conflicts(st, txn_id, mode):
                break
            st[2].popleft()
            self._grant(st, txn_id, mode)
            rec.pending.discard(key)
            if not rec.pending and rec.phase == "locking":
                self._start_exec(sid, rec)

    # -- participant lifecycle ----------------------------------------------------

    def _start_exec(self, sid: int, rec: _Part) -> None:
        rec.phase = "executing"
        ops = len(rec.reads) + len(rec.writes)
        if not self.engine.service(sid, max(ops, 1), ("qexec", rec.txn.id)):
            # overloaded: give up locally; the client will time out
            self._abort_local(sid, rec.txn.id, self.engine.now, wound=False)

    def _abort_local(self, sid: int, txn_id: int, now: int, *, wound: bool) -> None:
        rec = self.part.pop((sid, txn_id), None)
        if rec is None:
            return
        rec.phase = "aborted"
        self._drop_intents(sid, rec)
        self._release_locks(sid, rec, now)
        if wound:
            self.send(sid, rec.coord, "wound", message_bytes(0), body=(txn_id,))

    def _drop_intents(self, sid: int, rec: _Part) -> None:
        for rsid in rec.intent_servers:
            self.send(sid, rsid, "intent_drop", message_bytes(0), body=(rec.txn.id,))
        rec.intent_servers = []

    # -- coordinator lifecycle -------------------------------------------------------

    def _finish(
        self, txn_id: int, now: int, verdict: str, reason: str | None, position=None
    ) -> None:
        entry = self.coord.pop(txn_id, None)
        if entry is None:
            return
        self.release(entry.osid)
        txn = entry.txn
        if verdict != COMMITTED:
            for sid in entry.homes:
                self.send(entry.osid, sid, "abort", message_bytes(0), body=(txn_id,))
        self.engine.emit(
            Outcome(
                txn_id=txn_id,
                verdict=verdict,
                submit_time=txn.submit_time,
                commit_time=now,
                txn_class=txn.txn_class,
                reason=reason,
                commit_position=position,
                origin=txn.origin,
            ),
            txn,
        )

    # -- callbacks ------------------------------------------------------------------

    def on_submit(self, txn: Transaction, now: int) -> None:
        up = [s for s in self.topology.servers_in(txn.origin) if self.engine.servers[s].up]
        if not up:
            self.reject(txn, now, "origin-region-down")
            return
        osid = up[txn.id % len(up)]
        if not self.admit(osid):
            self.reject(txn, now, "admission-limit")
            return
        homes = self._split_by_home(txn)
        self.coord[txn.id] = _Coord(txn, osid, homes)
        self.engine.set_timer(osid, self.client_timeout_ns, ("ctimeout", txn.id))
        for sid, (reads, writes) in homes.items():
            size = message_bytes(len(reads) + len(writes), len(writes) * txn.value_bytes)
            self.send(osid, sid, "prep", size, body=(txn, reads, writes, osid))

    def on_message(self, msg: Message, now: int) -> None:
        tag = msg.tag
        sid = msg.dst
        if tag == "prep":
            sync = self.syncing.get(sid)
            if sync is not None:
                sync["buffer"].append(msg)
                return
            self._handle_prep(sid, msg, now)
        elif tag == "vote":
            txn_id = msg.body[0]
            entry = self.coord.get(txn_id)
            if entry is None or entry.osid != sid:
                return
            entry.waiting.discard(msg.src)
            if not entry.waiting:
                self._decide_commit(entry, now)
        elif tag in ("refuse", "wound"):
            txn_id = msg.body[0]
            entry = self.coord.get(txn_id)
            if entry is not None and entry.osid == sid:
                self._finish(txn_id, now, ABORTED, "conflict")
        elif tag == "part_abort":
            txn_id = msg.body[0]
            entry = self.coord.get(txn_id)
            if entry is not None and entry.osid == sid:
                self._finish(txn_id, now, ABORTED, "timeout")
        elif tag == "commit":
            txn_id, pos = msg.body
            rec = self.part.pop((sid, txn_id), None)
            if rec is None:
                return
            if rec.writes:
                self.store(sid).apply(rec.writes, txn_id, pos)
            rec.pending = set()  # every key was granted before the home voted
            rec.phase = "committed"
            self._release_locks(sid, rec, now)
        elif tag == "commit_r":
            txn_id, refs, pos = msg.body
            self.intents.pop((sid, txn_id), None)
            if refs:
                self.store(sid).apply(refs, txn_id, pos)
        elif tag == "intent":
            txn_id, refs = msg.body
            self.intents[(sid, txn_id)] = refs
            covered = tuple(sorted({ref[0] for ref in refs}))
            self.send(sid, msg.src, "intent_ack", message_bytes(0), body=(txn_id, covered))
        elif tag == "intent_ack":
            txn_id, covered = msg.body
            rec = self.part.get((sid, txn_id))
            if rec is None or rec.phase != "replicating":
                return
            for p in covered:
                rec.ack_got[p] = rec.ack_got.get(p, 0) + 1
            if all(rec.ack_got.get(p, 0) >= need for p, need in rec.ack_need.items()):
                rec.phase = "prepared"
                self.send(sid, rec.coord, "vote", message_bytes(0), body=(txn_id,))
        elif tag == "intent_drop":
            self.intents.pop((sid, msg.body[0]), None)
        elif tag == "abort":
            self._abort_local(sid, msg.body[0], now, wound=False)
        elif tag == "sync_req":
            partition = msg.body[0]
            view = self.store(sid).partition_view(partition)
            size = message_bytes(len(view), len(view) * 100)
            self.send(sid, msg.src, "sync_state", size, body=(partition, view))
        elif tag == "sync_state":
            partition, view = msg.body
            target = self.store(sid)
            for ref, (tid, pos) in view.items():
                cur = target.data.get(ref)
                if cur is None or cur[1] < pos:
                    target.data[ref] = (tid, pos)
            sync = self.syncing.get(sid)
            if sync is not None:
                sync["parts"].discard(partition)
                if not sync["parts"]:
                    buffered = sync["buffer"]
                    del self.syncing[sid]
                    for m in buffered:
                        if self.engine.servers[sid].up:
                            self._handle_prep(sid, m, now)

    def _handle_prep(self, sid: int, msg: Message, now: int) -> None:
        txn, reads, writes, coord_sid = msg.body
        rec = _Part(txn, coord_sid, reads, writes)
        self.part[(sid, txn.id)] = rec
        self.engine.set_timer(sid, self.participant_timeout_ns, ("ptimeout", txn.id))
        refused = False
        for key in sorted(rec.modes):
            verdict = self._try_acquire(sid, txn.id, key, rec.modes[key], now)
            if verdict == "granted":
                rec.pending.discard(key)
            elif verdict == "refused":
                refused = True
                break
        if refused:
            self._abort_local(sid, txn.id, now, wound=False)
            self.send(sid, coord_sid, "refuse", message_bytes(0), body=(txn.id,))
            return
        if not rec.pending and rec.phase == "locking":
            self._start_exec(sid, rec)

    def _decide_commit(self, entry: _Coord, now: int) -> None:
        txn = entry.txn
        pos = (now, txn.id)
        for sid, (reads, writes) in entry.homes.items():
            self.send(entry.osid, sid, "commit", message_bytes(0), body=(txn.id, pos))
            if writes:
                by_replica: dict[int, list] = {}
                for ref in writes:
                    for rsid in self._replica_sids(ref[0]):
                        by_replica.setdefault(rsid, []).append(ref)
                for rsid, refs in by_replica.items():
                    self.send(
                        entry.osid,
                        rsid,
                        "commit_r",
                        message_bytes(len(refs)),
                        body=(txn.id, tuple(refs), pos),
                    )
        self._finish(txn.id, now, COMMITTED, None, position=pos)

    def on_timer(self, sid: int, tag, now: int) -> None:
        kind = tag[0]
        if kind == "qexec":
            rec = self.part.get((sid, tag[1]))
            if rec is None or rec.phase != "executing":
                return
            if not rec.writes:
                rec.phase = "prepared"
                self.send(sid, rec.coord, "vote", message_bytes(0), body=(rec.txn.id,))
                return
            rec.phase = "replicating"
            by_replica: dict[int, list] = {}
            parts = set()
            for ref in rec.writes:
                parts.add(ref[0])
                for rsid in self._replica_sids(ref[0]):
                    by_replica.setdefault(rsid, []).append(ref)
            for p in parts:
                group = 1 + len(self._replica_sids(p))
                rec.ack_need[p] = (group // 2 + 1) - 1  # home itself counts
            if sum(rec.ack_need.values()) == 0:
                rec.phase = "prepared"
                self.send(sid, rec.coord, "vote", message_bytes(0), body=(rec.txn.id,))
                return
            for rsid, refs in by_replica.items():
                rec.intent_servers.append(rsid)
                size = message_bytes(len(refs), len(refs) * rec.txn.value_bytes)
                self.send(sid, rsid, "intent", size, body=(rec.txn.id, tuple(refs)))
        elif kind == "ptimeout":
            rec = self.part.get((sid, tag[1]))
            if rec is not None:
                coord_sid = rec.coord
                self._abort_local(sid, tag[1], now, wound=False)
                self.send(sid, coord_sid, "part_abort", message_bytes(0), body=(tag[1],))
        elif kind == "ctimeout":
            if tag[1] in self.coord:
                self._finish(tag[1], now, REJECTED, "client-timeout")

    def on_crash(self, sid: int, now: int) -> None:
        self.locks.pop(sid, None)
        self.part = {k: v for k, v in self.part.items() if k[0] != sid}
        self.intents = {k: v for k, v in self.intents.items() if k[0] != sid}
        self.coord = {t: e for t, e in self.coord.items() if e.osid != sid}
        self.syncing.pop(sid, None)
        self.reset_admission(sid)
        if sid in self.stores:
            self.stores[sid].clear()

    def on_recover(self, sid: int, now: int) -> None:
        wanted: dict[int, int] = {}  # partition -> donor
        for p in range(self.placement.n_partitions):
            group = [self._home_sid(p)] + self._replica_sids(p)
            if sid not in group:
                continue
            donors = [d for d in group if d != sid and self.engine.servers[d].up]
            if donors:
                wanted[p] = donors[0]
        if not wanted:
            return
        self.syncing[sid] = {"parts": set(wanted), "buffer": []}
        for p, donor in wanted.items():
            self.send(sid, donor, "sync_req", message_bytes(0), body=(p,))
