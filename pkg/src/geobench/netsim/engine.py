"""Deterministic discrete-event engine: servers, timers, message delivery
with impairments, and fault injection.

Events are processed in (fire_time, sequence) order; the sequence number
breaks ties by insertion order, so identical (config, seed) pairs replay
identical traces. The engine keeps a running SHA-256 over every processed
event for cheap determinism checks.

Crash semantics: a crash bumps the server's epoch, which invalidates all
of its queued work and pending timers; messages addressed to a down server
are discarded at delivery time. Sent messages are always billed as egress
(cloud providers charge for emitted bytes regardless of delivery).
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Iterator, Sequence

from ..core import Topology, Transaction, derive_seed
from ..errors import ConfigError, EngineAssertionError, FaultScheduleError

if TYPE_CHECKING:  # pragma: no cover
    from ..protocols.base import Outcome, ProtocolModel

MS = 1_000_000
NS_PER_S = 1_000_000_000

HEADER_BYTES = 64
KEYREF_BYTES = 32

_SUBMIT = "submit"
_MESSAGE = "message"
_TIMER = "timer"
_SERVICE = "service"
_CRASH = "crash"
_RECOVER = "recover"


@dataclass(slots=True)
class Message:
    src: int
    dst: int
    tag: str
    bytes: int
    body: Any = None


@dataclass(frozen=True)
class ServerModel:
    executors: int = 2
    service_time_ns: int = 20_000  # per operation
    inflight_capacity: int = 100_000

    def __post_init__(self):
        if self.executors < 1:
            raise ConfigError("executors must be >= 1")
        if self.inflight_capacity < 1:
            raise ConfigError("inflight_capacity must be >= 1")
        if self.service_time_ns < 0:
            raise ConfigError("service time must be >= 0")


@dataclass(frozen=True)
class FaultEntry:
    time_s: float
    target: tuple  # ("server", region, idx) | ("region", region)
    action: str  # "crash" | "recover"


@dataclass(frozen=True)
class FaultSchedule:
    entries: tuple[FaultEntry, ...] = ()

    def validate(self, topology: Topology, duration_s: float | None = None) -> None:
        down: set[tuple] = set()
        for e in sorted(self.entries, key=lambda e: e.time_s):
            if e.action not in ("crash", "recover"):
                raise FaultScheduleError(f"unknown fault action {e.action!r}")
            if e.time_s < 0 or (duration_s is not None and e.time_s > duration_s):
                raise FaultScheduleError(
                    f"fault at {e.time_s}s outside the run duration"
                )
            kind = e.target[0]
            if kind == "server":
                _, region, idx = e.target
                if region >= topology.n_regions or idx >= topology.servers_per_region[region]:
                    raise FaultScheduleError(f"fault target {e.target} does not exist")
            elif kind == "region":
                if e.target[1] >= topology.n_regions:
                    raise FaultScheduleError(f"fault target {e.target} does not exist")
            else:
                raise FaultScheduleError(f"unknown fault target kind {kind!r}")
            if e.action == "recover":
                if e.target not in down:
                    raise FaultScheduleError(
                        f"recover at {e.time_s}s for {e.target} without a crash"
                    )
                down.discard(e.target)
            else:
                if e.target in down:
                    raise FaultScheduleError(f"double crash for {e.target}")
                down.add(e.target)

    @classmethod
    def from_json(cls, text: str) -> "FaultSchedule":
        raw = json.loads(text)
        entries = []
        for item in raw:
            target = item["target"]
            if isinstance(target, str):
                parts = target.split(":")
                if parts[0] == "server":
                    tgt = ("server", int(parts[1]), int(parts[2]))
                elif parts[0] == "region":
                    tgt = ("region", int(parts[1]))
                else:
                    raise FaultScheduleError(f"bad fault target {target!r}")
            else:
                tgt = tuple(target)
            entries.append(
                FaultEntry(time_s=float(item["time_s"]), target=tgt, action=item["action"])
            )
        return cls(tuple(entries))

    def to_json(self) -> str:
        return json.dumps(
            [
                {
                    "time_s": e.time_s,
                    "target": ":".join(str(x) for x in e.target),
                    "action": e.action,
                }
                for e in self.entries
            ]
        )


class _ServerRuntime:
    __slots__ = (
        "up",
        "epoch",
        "lanes",
        "inflight",
        "busy_ns",
        "peak_inflight",
        "peak_queue",
        "sent_bytes",
    )

    def __init__(self, executors: int):
        self.up = True
        self.epoch = 0
        self.lanes = [0] * executors  # heap of lane-free times
        self.inflight = 0
        self.busy_ns = 0
        self.peak_inflight = 0
        self.peak_queue = 0
        self.sent_bytes = 0


class Engine:
    """One single-threaded simulation instance."""

    def __init__(
        self,
        topology: Topology,
        wan: "WanProfile",
        seed: int,
        server_model: ServerModel | None = None,
        trace_path: str | None = None,
    ):
        from .wan import WanProfile  # local import to avoid cycles in typing

        if wan.n_regions != topology.n_regions:
            raise ConfigError(
                f"WAN profile covers {wan.n_regions} regions, topology has "
                f"{topology.n_regions}"
            )
        self.topology = topology
        self.wan = wan
        self.model = server_model or ServerModel()
        self.now = 0
        self.rng = random.Random(derive_seed(seed, "net"))
        self.proto_rng = random.Random(derive_seed(seed, "proto"))
        self._heap: list = []
        self._seq = 0
        self.servers = [_ServerRuntime(self.model.executors) for _ in range(topology.n_servers)]
        n = topology.n_regions
        self.egress = [[0] * n for _ in range(n)]
        self.msgs_sent = 0
        self.msgs_delivered = 0
        self.msgs_dropped_loss = 0
        self.msgs_discarded_down = 0
        self._link_free: dict[tuple[int, int], int] = {}
        self._hash = hashlib.sha256()
        self._trace_fh = open(trace_path, "w") if trace_path else None
        self.protocol: "ProtocolModel | None" = None
        self.collector = None
        self._stream_iter: Iterator[Transaction] | None = None
        # precomputed ns one-way delays per region pair
        self._half_rtt_ns = [
            [int(wan.rtt_ms[i][j] / 2 * MS) for j in range(n)] for i in range(n)
        ]

    # -- wiring ---------------------------------------------------------

    def attach(self, protocol: "ProtocolModel", collector=None) -> None:
        self.protocol = protocol
        self.collector = collector

    def load_stream(self, txns: Iterator[Transaction]) -> None:
        """Queue client submissions; pulled lazily to keep memory flat."""
        self._stream_iter = iter(txns)
        self._schedule_next_submit()

    def load_faults(self, schedule: FaultSchedule, duration_s: float | None = None) -> None:
        schedule.validate(self.topology, duration_s)
        for e in schedule.entries:
            kind = _CRASH if e.action == "crash" else _RECOVER
            self._push(int(e.time_s * NS_PER_S), kind, e.target)

    def _schedule_next_submit(self) -> None:
        if self._stream_iter is None:
            return
        txn = next(self._stream_iter, None)
        if txn is None:
            self._stream_iter = None
            return
        if txn.submit_time < self.now:
            raise EngineAssertionError(
                f"stream submit time {txn.submit_time} is in the past ({self.now})"
            )
        self._push(txn.submit_time, _SUBMIT, txn)

    # -- scheduling primitives -------------------------------------------

    def _push(self, at: int, kind: str, data) -> None:
        if at < self.now:
            raise EngineAssertionError(
                f"event {kind} scheduled in the past: {at} < {self.now}"
            )
        self._seq += 1
        heapq.heappush(self._heap, (at, self._seq, kind, data))

    def set_timer(self, sid: int, delay_ns: int, tag) -> None:
        if delay_ns < 0:
            raise EngineAssertionError("negative timer delay")
        srv = self.servers[sid]
        self._push(self.now + delay_ns, _TIMER, (sid, srv.epoch, tag))

    def service(self, sid: int, op_count: int, tag) -> bool:
        """Queue ``op_count`` operations on one of the server's executor
        lanes (FIFO); completion is delivered through ``on_timer`` with the
        given tag. Returns False when the server is over capacity."""
        if op_count <= 0:
            raise EngineAssertionError(f"service() with op_count={op_count}")
        srv = self.servers[sid]
        if not srv.up:
            raise EngineAssertionError(f"service() on down server {sid}")
        if srv.inflight >= self.model.inflight_capacity:
            return False
        srv.inflight += 1
        srv.peak_inflight = max(srv.peak_inflight, srv.inflight)
        queued = srv.inflight - self.model.executors
        if queued > srv.peak_queue:
            srv.peak_queue = queued
        start = max(self.now, heapq.heappop(srv.lanes))
        duration = op_count * self.model.service_time_ns
        done = start + duration
        heapq.heappush(srv.lanes, done)
        self._push(done, _SERVICE, (sid, srv.epoch, tag, duration))
        return True

    def send(self, msg: Message, /) -> None:
        if msg.bytes < HEADER_BYTES:
            raise EngineAssertionError(f"message below header size: {msg.bytes}")
        src_srv = self.servers[msg.src]
        if not src_srv.up:
            raise EngineAssertionError(f"send() from down server {msg.src}")
        topo = self.topology
        sr = topo.region_of(msg.src)
        dr = topo.region_of(msg.dst)
        self.egress[sr][dr] += msg.bytes
        src_srv.sent_bytes += msg.bytes
        self.msgs_sent += 1
        if self.wan.loss_prob and self.rng.random() < self.wan.loss_prob:
            self.msgs_dropped_loss += 1
            return
        base = self._half_rtt_ns[sr][dr]
        j = self.wan.jitter_fraction
        if j:
            delay = int(base * (1.0 + j * (2.0 * self.rng.random() - 1.0)))
            if delay < 0:
                delay = 0
        else:
            delay = base
        if self.wan.bandwidth_bytes_per_s:
            ser = int(msg.bytes / self.wan.bandwidth_bytes_per_s * NS_PER_S)
            start = max(self.now, self._link_free.get((sr, dr), 0))
            self._link_free[(sr, dr)] = start + ser
            delay += (start + ser) - self.now
        self._push(self.now + delay, _MESSAGE, msg)

    def emit(self, outcome: "Outcome", txn: Transaction) -> None:
        if self.collector is not None:
            self.collector.record(outcome, txn)

    # -- faults -----------------------------------------------------------

    def _crash_server(self, sid: int) -> None:
        srv = self.servers[sid]
        if not srv.up:
            return
        srv.up = False
        srv.epoch += 1
        srv.lanes = [self.now] * self.model.executors
        srv.inflight = 0
        if self.protocol is not None:
            self.protocol.on_crash(sid, self.now)

    def _recover_server(self, sid: int) -> None:
        srv = self.servers[sid]
        if srv.up:
            raise EngineAssertionError(f"recover on up server {sid}")
        srv.up = True
        srv.lanes = [self.now] * self.model.executors
        if self.protocol is not None:
            self.protocol.on_recover(sid, self.now)

    def _apply_fault(self, kind: str, target: tuple) -> None:
        if target[0] == "server":
            sids = [self.topology.server_id(target[1], target[2])]
        else:
            sids = list(self.topology.servers_in(target[1]))
        for sid in sids:
            if kind == _CRASH:
                self._crash_server(sid)
            else:
                self._recover_server(sid)

    # -- main loop ---------------------------------------------------------

    def _note(self, at: int, seq: int, kind: str, desc: str) -> None:
        line = f"{at} {seq} {kind} {desc}"
        self._hash.update(line.encode())
        self._hash.update(b"\n")
        if self._trace_fh is not None:
            self._trace_fh.write(
                json.dumps({"t": at, "seq": seq, "kind": kind, "what": desc}) + "\n"
            )

    def run(self, until_s: float | None = None) -> None:
        """Process events in order until the queue drains or the clock
        reaches ``until_s`` (simulated seconds)."""
        until = None if until_s is None else int(until_s * NS_PER_S)
        proto = self.protocol
        heap = self._heap
        while heap:
            at, seq, kind, data = heap[0]
            if until is not None and at >= until:
                break
            heapq.heappop(heap)
            if at < self.now:
                raise EngineAssertionError("clock went backwards")
            self.now = at
            if kind == _MESSAGE:
                dst = self.servers[data.dst]
                if not dst.up:
                    self.msgs_discarded_down += 1
                    self._note(at, seq, "msg_discarded", f"{data.src}>{data.dst} {data.tag}")
                    continue
                self.msgs_delivered += 1
                self._note(at, seq, "msg", f"{data.src}>{data.dst} {data.tag} {data.bytes}")
                proto.on_message(data, at)
            elif kind == _SERVICE:
                sid, epoch, tag, duration = data
                srv = self.servers[sid]
                if not srv.up or srv.epoch != epoch:
                    continue  # work discarded by an intervening crash
                srv.inflight -= 1
                srv.busy_ns += duration
                self._note(at, seq, "svc", f"{sid} {tag!r}")
                proto.on_timer(sid, tag, at)
            elif kind == _TIMER:
                sid, epoch, tag = data
                srv = self.servers[sid]
                if not srv.up or srv.epoch != epoch:
                    continue
                self._note(at, seq, "timer", f"{sid} {tag!r}")
                proto.on_timer(sid, tag, at)
            elif kind == _SUBMIT:
                self._note(at, seq, "submit", str(data.id))
                if self.collector is not None:
                    self.collector.note_submitted(data)
                self._schedule_next_submit()
                proto.on_submit(data, at)
            else:  # crash / recover
                self._note(at, seq, kind, str(data))
                self._apply_fault(kind, data)
        if until is not None and self.now < until:
            self.now = until
        if self._trace_fh is not None:
            self._trace_fh.flush()

    def quiesce(self) -> None:
        """Drain every remaining event (run to completion)."""
        self.run(None)

    # -- introspection ------------------------------------------------------

    @property
    def trace_hash(self) -> str:
        return self._hash.hexdigest()

    def conservation(self) -> dict[str, int]:
        return {
            "sent": self.msgs_sent,
            "delivered": self.msgs_delivered,
            "dropped_loss": self.msgs_dropped_loss,
            "discarded_down": self.msgs_discarded_down,
        }

    def billed_bytes(self) -> int:
        n = self.topology.n_regions
        return sum(
            self.egress[i][j] for i in range(n) for j in range(n) if i != j
        )

    def close(self) -> None:
        if self._trace_fh is not None:
            self._trace_fh.close()
            self._trace_fh = None
