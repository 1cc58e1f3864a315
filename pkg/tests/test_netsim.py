import statistics

import pytest

from geobench.core import Topology
from geobench.errors import ConfigError, EngineAssertionError, FaultScheduleError
from geobench.netsim.engine import (
    Engine,
    FaultEntry,
    FaultSchedule,
    HEADER_BYTES,
    Message,
    ServerModel,
)
from geobench.netsim.wan import WanProfile
from geobench.protocols.base import ProtocolModel

MS = 1_000_000


class Recorder(ProtocolModel):
    """Captures every callback; used to observe engine behavior directly."""

    name = "recorder"

    def __init__(self, engine, topology, placement=None, params=None):
        self.engine = engine
        self.topology = topology
        self.deliveries = []
        self.timers = []
        self.crashes = []
        self.recoveries = []

    def on_submit(self, txn, now):
        pass

    def on_message(self, msg, now):
        self.deliveries.append((msg, now))

    def on_timer(self, sid, tag, now):
        self.timers.append((sid, tag, now))

    def on_crash(self, sid, now):
        self.crashes.append((sid, now))

    def on_recover(self, sid, now):
        self.recoveries.append((sid, now))


def build(
    inter_ms=100.0,
    jitter=0.0,
    loss=0.0,
    regions=2,
    servers=1,
    seed=1,
    model=None,
    bandwidth=None,
):
    topo = Topology.uniform(regions, servers, max(regions * servers, 2))
    wan = WanProfile.uniform(
        regions, inter_ms, jitter_fraction=jitter, loss_prob=loss,
        bandwidth_bytes_per_s=bandwidth,
    )
    engine = Engine(topo, wan, seed=seed, server_model=model)
    rec = Recorder(engine, topo)
    engine.attach(rec)
    return engine, rec, topo


class TestSend:
    def test_half_rtt_exact_without_jitter(self):
        engine, rec, topo = build(inter_ms=100.0, jitter=0.0)
        engine.send(Message(src=0, dst=1, tag="x", bytes=HEADER_BYTES))
        engine.quiesce()
        assert len(rec.deliveries) == 1
        assert rec.deliveries[0][1] == 50 * MS

    def test_jitter_uniform_bounds_and_mean(self):
        engine, rec, topo = build(inter_ms=100.0, jitter=0.10)
        for _ in range(100_000):
            engine.send(Message(src=0, dst=1, tag="x", bytes=HEADER_BYTES))
        engine.quiesce()
        delays = [t for _, t in rec.deliveries]
        assert min(delays) >= 45 * MS
        assert max(delays) <= 55 * MS
        mean_ms = statistics.fmean(delays) / MS
        assert abs(mean_ms - 50.0) < 0.1

    def test_loss_rate_binomial(self):
        engine, rec, topo = build(loss=0.02)
        n = 100_000
        for _ in range(n):
            engine.send(Message(src=0, dst=1, tag="x", bytes=HEADER_BYTES))
        engine.quiesce()
        dropped = engine.msgs_dropped_loss
        assert abs(dropped - 2000) <= 300  # 3 sigma of Binomial(1e5, 0.02)
        # lost messages are still billed as egress
        assert engine.egress[0][1] == n * HEADER_BYTES

    def test_conservation_ledger(self):
        engine, rec, topo = build(loss=0.1, regions=2, servers=2)
        engine.load_faults(
            FaultSchedule((FaultEntry(5.0, ("server", 1, 0), "crash"),)), 100.0
        )
        for i in range(5000):
            engine.send(Message(src=0, dst=2, tag="x", bytes=HEADER_BYTES))
            engine.send(Message(src=1, dst=3, tag="y", bytes=HEADER_BYTES))
        engine.quiesce()
        c = engine.conservation()
        assert c["sent"] == 10_000
        assert c["sent"] == c["delivered"] + c["dropped_loss"] + c["discarded_down"]

    def test_below_header_size_asserts(self):
        engine, rec, topo = build()
        with pytest.raises(EngineAssertionError, match="header"):
            engine.send(Message(src=0, dst=1, tag="x", bytes=10))

    def test_send_from_down_server_asserts(self):
        engine, rec, topo = build()
        engine._crash_server(0)
        with pytest.raises(EngineAssertionError, match="down"):
            engine.send(Message(src=0, dst=1, tag="x", bytes=HEADER_BYTES))

    def test_bandwidth_cap_serializes_back_to_back_sends(self):
        # 1 MB at 1 MB/s costs one second of link time per message
        engine, rec, topo = build(inter_ms=100.0, bandwidth=1_000_000.0)
        engine.send(Message(src=0, dst=1, tag="a", bytes=1_000_000))
        engine.send(Message(src=0, dst=1, tag="b", bytes=1_000_000))
        engine.quiesce()
        t_a = next(t for m, t in rec.deliveries if m.tag == "a")
        t_b = next(t for m, t in rec.deliveries if m.tag == "b")
        assert t_a == 1_000 * MS + 50 * MS
        assert t_b == 2_000 * MS + 50 * MS


class TestRun:
    def test_empty_schedule_advances_clock_to_until(self):
        engine, rec, topo = build()
        engine.run(12.5)
        assert engine.now == int(12.5e9)
        assert not rec.deliveries and not rec.timers

    def test_equal_fire_times_processed_in_insertion_order(self):
        engine, rec, topo = build()
        for tag in ("first", "second", "third"):
            engine.set_timer(0, 1000, (tag,))
        engine.quiesce()
        assert [t[1][0] for t in rec.timers] == ["first", "second", "third"]

    def test_identical_seed_identical_trace_hash(self):
        hashes = []
        for _ in range(2):
            engine, rec, topo = build(jitter=0.1, loss=0.05, seed=42)
            for i in range(2000):
                engine.send(Message(src=0, dst=1, tag=f"m{i}", bytes=HEADER_BYTES))
            engine.quiesce()
            hashes.append(engine.trace_hash)
        assert hashes[0] == hashes[1]
        engine, rec, topo = build(jitter=0.1, loss=0.05, seed=43)
        for i in range(2000):
            engine.send(Message(src=0, dst=1, tag=f"m{i}", bytes=HEADER_BYTES))
        engine.quiesce()
        assert engine.trace_hash != hashes[0]

    def test_scheduling_in_the_past_asserts(self):
        engine, rec, topo = build()
        engine.set_timer(0, 10_000, ("late",))
        engine.quiesce()
        with pytest.raises(EngineAssertionError, match="past"):
            engine._push(engine.now - 1, "timer", (0, 0, ("x",)))

    def test_trace_file(self, tmp_path):
        path = tmp_path / "trace.ndjson"
        topo = Topology.uniform(2, 1, 2)
        wan = WanProfile.uniform(2, 10.0)
        engine = Engine(topo, wan, seed=1, trace_path=str(path))
        engine.attach(Recorder(engine, topo))
        engine.set_timer(0, 500, ("t",))
        engine.quiesce()
        engine.close()
        assert path.read_text().strip()


class TestFaults:
    def test_messages_to_down_server_discarded(self):
        engine, rec, topo = build()
        engine.load_faults(
            FaultSchedule((FaultEntry(0.01, ("server", 1, 0), "crash"),)), 10.0
        )
        engine.send(Message(src=0, dst=1, tag="x", bytes=HEADER_BYTES))  # at 50ms
        engine.quiesce()
        assert not rec.deliveries
        assert engine.msgs_discarded_down == 1

    def test_region_crash_downs_all_servers(self):
        engine, rec, topo = build(regions=2, servers=3)
        engine.load_faults(
            FaultSchedule((FaultEntry(1.0, ("region", 1), "crash"),)), 10.0
        )
        engine.quiesce()
        assert sorted(s for s, _ in rec.crashes) == list(topo.servers_in(1))
        for sid in topo.servers_in(1):
            assert not engine.servers[sid].up

    def test_recover_callback_fires_exactly_once(self):
        engine, rec, topo = build()
        engine.load_faults(
            FaultSchedule(
                (
                    FaultEntry(15.0, ("server", 1, 0), "crash"),
                    FaultEntry(45.0, ("server", 1, 0), "recover"),
                )
            ),
            75.0,
        )
        engine.quiesce()
        assert rec.recoveries == [(1, 45_000 * MS)]

    def test_crash_discards_pending_timers(self):
        engine, rec, topo = build()
        engine.set_timer(1, int(2e9), ("doomed",))
        engine.load_faults(
            FaultSchedule((FaultEntry(1.0, ("server", 1, 0), "crash"),)), 10.0
        )
        engine.quiesce()
        assert not rec.timers

    def test_timer_survives_unrelated_crash(self):
        engine, rec, topo = build(regions=2, servers=2)
        engine.set_timer(0, int(2e9), ("survives",))
        engine.load_faults(
            FaultSchedule((FaultEntry(1.0, ("server", 1, 0), "crash"),)), 10.0
        )
        engine.quiesce()
        assert [t[1][0] for t in rec.timers] == ["survives"]

    def test_recover_without_crash_rejected_at_validation(self):
        sched = FaultSchedule((FaultEntry(1.0, ("server", 0, 0), "recover"),))
        engine, rec, topo = build()
        with pytest.raises(FaultScheduleError, match="without a crash"):
            engine.load_faults(sched, 10.0)

    def test_fault_outside_duration_rejected(self):
        sched = FaultSchedule((FaultEntry(99.0, ("server", 0, 0), "crash"),))
        engine, rec, topo = build()
        with pytest.raises(FaultScheduleError, match="duration"):
            engine.load_faults(sched, 10.0)

    def test_unknown_target_rejected(self):
        sched = FaultSchedule((FaultEntry(1.0, ("server", 7, 0), "crash"),))
        engine, rec, topo = build()
        with pytest.raises(FaultScheduleError, match="exist"):
            engine.load_faults(sched, 10.0)

    def test_fault_schedule_json_round_trip(self):
        sched = FaultSchedule(
            (
                FaultEntry(15.0, ("server", 0, 1), "crash"),
                FaultEntry(45.0, ("server", 0, 1), "recover"),
                FaultEntry(50.0, ("region", 2), "crash"),
            )
        )
        again = FaultSchedule.from_json(sched.to_json())
        assert again == sched


class TestService:
    def test_single_item_timing(self):
        model = ServerModel(executors=1, service_time_ns=50_000)
        engine, rec, topo = build(model=model)
        assert engine.service(0, 10, ("done",))
        engine.quiesce()
        assert rec.timers == [(0, ("done",), 500_000)]

    def test_fifo_on_one_executor(self):
        model = ServerModel(executors=1, service_time_ns=50_000)
        engine, rec, topo = build(model=model)
        engine.service(0, 10, ("a",))
        engine.service(0, 10, ("b",))
        engine.quiesce()
        assert rec.timers == [(0, ("a",), 500_000), (0, ("b",), 1_000_000)]

    def test_two_executors_run_in_parallel(self):
        model = ServerModel(executors=2, service_time_ns=50_000)
        engine, rec, topo = build(model=model)
        engine.service(0, 10, ("a",))
        engine.service(0, 10, ("b",))
        engine.quiesce()
        assert [t for _, _, t in rec.timers] == [500_000, 500_000]

    def test_overload_rejection(self):
        model = ServerModel(executors=1, service_time_ns=1000, inflight_capacity=2)
        engine, rec, topo = build(model=model)
        assert engine.service(0, 1, ("a",))
        assert engine.service(0, 1, ("b",))
        assert not engine.service(0, 1, ("c",))

    def test_saturation_grows_queue_and_latency(self):
        model = ServerModel(executors=1, service_time_ns=100_000)
        engine, rec, topo = build(model=model)
        # 100 items of 10 ops each arrive at once: sojourn grows linearly
        for i in range(100):
            engine.service(0, 10, ("w", i))
        engine.quiesce()
        completions = [t for _, _, t in rec.timers]
        assert completions == sorted(completions)
        assert completions[-1] == 100 * 1_000_000
        assert engine.servers[0].peak_queue >= 98

    def test_zero_ops_asserts(self):
        engine, rec, topo = build()
        with pytest.raises(EngineAssertionError, match="op_count"):
            engine.service(0, 0, ("x",))

    def test_busy_accounting(self):
        model = ServerModel(executors=2, service_time_ns=1000)
        engine, rec, topo = build(model=model)
        engine.service(0, 5, ("a",))
        engine.service(0, 7, ("b",))
        engine.quiesce()
        assert engine.servers[0].busy_ns == 12_000


class TestWanProfile:
    def test_symmetry_enforced(self):
        with pytest.raises(ConfigError, match="symmetric"):
            WanProfile(rtt_ms=((0.5, 10.0), (20.0, 0.5)))

    def test_loss_bounds(self):
        with pytest.raises(ConfigError, match="loss"):
            WanProfile.uniform(2, 10.0, loss_prob=1.0)

    def test_synthetic_mean_is_exact(self):
        wan = WanProfile.synthetic_matrix(8, mean_rtt_ms=111.0)
        assert wan.synthetic
        assert wan.mean_inter_region_rtt() == pytest.approx(111.0, abs=0.01)

    def test_json_round_trip(self, tmp_path):
        wan = WanProfile.synthetic_matrix(4, mean_rtt_ms=80.0, region_labels=None)
        path = tmp_path / "wan.json"
        path.write_text(wan.to_json())
        again = WanProfile.load(path)
        assert again.rtt_ms == wan.rtt_ms
        assert again.synthetic

    def test_missing_file_names_path(self):
        with pytest.raises(ConfigError, match="nope.json"):
            WanProfile.load("nope.json")

    def test_scaled_leaves_diagonal(self):
        wan = WanProfile.uniform(3, 100.0, intra_ms=0.5)
        scaled = wan.scaled(10.0)
        assert scaled.rtt_ms[0][1] == 1000.0
        assert scaled.rtt_ms[0][0] == 0.5

    def test_with_mean_rescales(self):
        wan = WanProfile.synthetic_matrix(4, mean_rtt_ms=111.0)
        rescaled = wan.with_mean(222.0)
        assert rescaled.mean_inter_region_rtt() == pytest.approx(222.0, abs=0.01)
