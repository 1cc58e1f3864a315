import random

import pytest

from geobench.config import (
    ArrivalSection,
    RunConfig,
    TopologySection,
    WanSection,
    WorkloadSection,
    YcsbSection,
)
from geobench.core import HomeSpan
from geobench.errors import ConfigError, RegistrationError
from geobench.protocols import (
    ABORTED,
    COMMITTED,
    REJECTED,
    Echo,
    available,
    create,
    protocol_class,
    register,
    unregister,
)
from geobench.protocols.base import FifoChannel, ProtocolModel
from geobench.protocols.oracle import replay, state_divergence
from geobench.scenarios.runner import build_run, run_single

from conftest import run_to_quiescence, small_run_config


def uniform_wan(inter_ms, jitter=0.0):
    return WanSection(
        rtt_ms=None, mean_rtt_ms=None, jitter_fraction=jitter, loss_prob=0.0,
    )


def flat_config(protocol, inter_ms=100.0, regions=2, rate=50.0, duration=4.0,
                jitter=0.0, ycsb=None, seed=1, **kw):
    wan = WanSection(
        rtt_ms=[
            [0.5 if i == j else inter_ms for j in range(regions)]
            for i in range(regions)
        ],
        jitter_fraction=jitter,
    )
    return small_run_config(
        protocol,
        topology=TopologySection(regions=regions, servers_per_region=2,
                                 partitions=4 * regions),
        wan=wan,
        arrival=ArrivalSection(mode="open", rate_tps=rate),
        duration_s=duration,
        workload=WorkloadSection(kind="ycsb", ycsb=ycsb or YcsbSection()),
        seed=seed,
        **kw,
    )


class TestRegistry:
    def test_builtins_available(self):
        assert set(available()) >= {
            "echo",
            "global_sequencer",
            "home_aware",
            "quorum_commit",
        }

    def test_duplicate_registration_rejected(self):
        with pytest.raises(RegistrationError, match="already"):
            register(Echo)

    def test_unknown_name_lists_available(self):
        with pytest.raises(ConfigError, match="global_sequencer"):
            protocol_class("nope")

    def test_custom_protocol_integrates(self):
        class Instant(Echo):
            name = "instant_test"

        register(Instant)
        try:
            assert "instant_test" in available()
            cfg = small_run_config("instant_test")
            rep = run_single(cfg)
            assert rep.committed == rep.submitted
        finally:
            unregister("instant_test")


class TestEcho:
    def test_commits_everything_near_service_time(self):
        cfg = small_run_config("echo")
        ctx, outcomes, txns = run_to_quiescence(cfg)
        assert all(o.verdict == COMMITTED for o in outcomes)
        # latency ~ service only: 10 ops x 20 us
        latencies = [o.commit_time - o.submit_time for o in outcomes]
        assert max(latencies) < 5_000_000  # < 5 ms


class TestGlobalSequencer:
    def test_remote_origin_latency_is_one_rtt_plus_service(self):
        # one-way to the sequencer plus the ordered broadcast back
        cfg = flat_config("global_sequencer", inter_ms=100.0, rate=10.0,
                          duration=2.0)
        ctx, outcomes, _ = run_to_quiescence(cfg)
        remote = [
            o for o in outcomes
            if o.origin != 0 and o.verdict == COMMITTED
        ]
        assert remote
        for o in remote:
            latency_ms = (o.commit_time - o.submit_time) / 1e6
            assert 100.0 <= latency_ms <= 103.0

    def test_no_aborts_ever(self):
        cfg = flat_config(
            "global_sequencer",
            ycsb=YcsbSection(theta=0.99, hot_set_size=10),
            rate=200.0,
        )
        ctx, outcomes, _ = run_to_quiescence(cfg)
        assert not any(o.verdict == ABORTED for o in outcomes)

    def test_conflicting_txns_both_commit_and_states_converge(self):
        cfg = flat_config(
            "global_sequencer",
            ycsb=YcsbSection(theta=1.0, hot_set_size=2, mp_pct=0.0,
                             lsh_pct=1.0, fsh_pct=0.0, mh_pct=0.0),
            rate=100.0,
        )
        ctx, outcomes, txns = run_to_quiescence(cfg)
        assert all(o.verdict == COMMITTED for o in outcomes)
        assert state_divergence(ctx.protocol, ctx.topology, ctx.placement,
                                outcomes, txns) == []

    def test_sequencer_region_crash_stalls_submissions(self):
        from geobench.config import FaultItem

        cfg = flat_config("global_sequencer", rate=100.0, duration=12.0,
                          warmup_s=1.0)
        cfg.faults = [FaultItem(time_s=4.0, target="region:0", action="crash")]
        cfg.params = {"client_timeout_ns": 2_000_000_000}
        ctx, outcomes, _ = run_to_quiescence(cfg)
        rejected = [o for o in outcomes if o.verdict == REJECTED]
        assert rejected
        late_commits = [
            o for o in outcomes
            if o.verdict == COMMITTED and o.submit_time > int(4.5e9)
        ]
        assert not late_commits


class TestHomeAware:
    def test_lsh_latency_small_and_wan_independent(self):
        lsh_only = YcsbSection(lsh_pct=1.0, fsh_pct=0.0, mh_pct=0.0)
        p50 = {}
        for inter in (100.0, 1000.0):
            cfg = flat_config("home_aware", inter_ms=inter, ycsb=lsh_only,
                              rate=50.0, duration=3.0)
            ctx, outcomes, _ = run_to_quiescence(cfg)
            lat = sorted(o.commit_time - o.submit_time for o in outcomes)
            p50[inter] = lat[len(lat) // 2] / 1e6
            assert p50[inter] < 5.0
        assert abs(p50[100.0] - p50[1000.0]) / p50[100.0] < 0.05

    def test_fsh_needs_at_least_one_round_trip(self):
        fsh_only = YcsbSection(lsh_pct=0.0, fsh_pct=1.0, mh_pct=0.0)
        cfg = flat_config("home_aware", inter_ms=100.0, ycsb=fsh_only,
                          rate=20.0, duration=3.0)
        ctx, outcomes, _ = run_to_quiescence(cfg)
        assert outcomes
        for o in outcomes:
            assert (o.commit_time - o.submit_time) >= 100 * 1_000_000

    def test_pure_mh_p50_close_to_global_sequencer(self):
        mh_only = YcsbSection(lsh_pct=0.0, fsh_pct=0.0, mh_pct=1.0)
        p50 = {}
        for proto in ("home_aware", "global_sequencer"):
            cfg = flat_config(proto, inter_ms=100.0, regions=3, ycsb=mh_only,
                              rate=50.0, duration=4.0)
            ctx, outcomes, _ = run_to_quiescence(cfg)
            lat = sorted(o.commit_time - o.submit_time
                         for o in outcomes if o.verdict == COMMITTED)
            p50[proto] = lat[len(lat) // 2]
        assert abs(p50["home_aware"] - p50["global_sequencer"]) <= (
            0.15 * p50["global_sequencer"]
        )

    def test_no_aborts_ever(self):
        cfg = flat_config("home_aware",
                          ycsb=YcsbSection(theta=0.99, hot_set_size=5),
                          rate=150.0)
        ctx, outcomes, _ = run_to_quiescence(cfg)
        assert not any(o.verdict == ABORTED for o in outcomes)


class TestQuorumCommit:
    def test_lsh_pays_wan_replication(self):
        lsh_only = YcsbSection(lsh_pct=1.0, fsh_pct=0.0, mh_pct=0.0)
        cfg = flat_config("quorum_commit", inter_ms=100.0, regions=3,
                          ycsb=lsh_only, rate=20.0, duration=3.0)
        ctx, outcomes, _ = run_to_quiescence(cfg)
        committed = [o for o in outcomes if o.verdict == COMMITTED]
        assert committed
        for o in committed:
            assert (o.commit_time - o.submit_time) >= 50 * 1_000_000

    def test_two_contending_txns_exactly_one_aborts(self):
        # a two-transaction replayed stream hitting one key while both are
        # still acquiring locks (WAN replication keeps the window open)
        from geobench.workload.stream import dump_stream
        from conftest import make_txn
        import tempfile, os

        for first_id, second_id in ((1, 2), (2, 1)):
            txns = [
                make_txn(writes=[(0, 7)], origin=0, txn_id=first_id, submit=0),
                make_txn(writes=[(0, 7)], origin=1, txn_id=second_id,
                         submit=1_000_000),
            ]
            with tempfile.TemporaryDirectory() as td:
                path = os.path.join(td, "two.ndjson")
                dump_stream(txns, path)
                cfg = flat_config("quorum_commit", inter_ms=100.0, regions=3)
                cfg.workload = WorkloadSection.model_validate(
                    {"kind": "replay", "replay": {"path": path}}
                )
                ctx, outcomes, _ = run_to_quiescence(cfg)
            verdicts = sorted(o.verdict for o in outcomes)
            assert verdicts == [ABORTED, COMMITTED]
            aborted = next(o for o in outcomes if o.verdict == ABORTED)
            assert aborted.reason == "conflict"
            assert aborted.txn_id == 2  # the younger transaction loses

    def test_skew_raises_abort_rate(self):
        rates = {}
        for theta in (0.0, 0.99):
            cfg = flat_config(
                "quorum_commit", regions=3,
                ycsb=YcsbSection(theta=theta, hot_set_size=10), rate=150.0,
            )
            ctx, outcomes, _ = run_to_quiescence(cfg)
            aborts = sum(1 for o in outcomes if o.verdict == ABORTED)
            rates[theta] = aborts / len(outcomes)
        assert rates[0.99] > rates[0.0]


class TestSerializability:
    @pytest.mark.parametrize(
        "protocol", ["global_sequencer", "home_aware", "quorum_commit"]
    )
    def test_small_runs_match_serial_oracle(self, protocol):
        for seed in (11, 12, 13):
            cfg = flat_config(
                protocol, regions=3, rate=100.0, duration=3.0,
                ycsb=YcsbSection(theta=0.9, hot_set_size=25), seed=seed,
            )
            ctx, outcomes, txns = run_to_quiescence(cfg)
            problems = state_divergence(
                ctx.protocol, ctx.topology, ctx.placement, outcomes, txns
            )
            assert problems == []
            if protocol != "quorum_commit":
                assert sum(1 for o in outcomes if o.verdict == ABORTED) == 0

    def test_outcome_totality(self):
        for protocol in ("global_sequencer", "home_aware", "quorum_commit"):
            cfg = flat_config(protocol, regions=3, rate=100.0)
            ctx, outcomes, _ = run_to_quiescence(cfg)
            assert len(outcomes) == len({o.txn_id for o in outcomes})
            rep = ctx.collector.finalize(ctx.engine, cfg.duration_s)
            assert rep.submitted == (
                rep.committed + rep.aborted + rep.rejected + rep.in_flight
            )


class TestOracle:
    def test_replay_of_nothing_is_initial_store(self):
        assert replay([], {}) == {}
        assert replay([], {}, initial={("k", 1): (0, 0)}) == {("k", 1): (0, 0)}

    def test_replay_orders_by_commit_position(self):
        from conftest import make_txn

        t1 = make_txn(writes=[(0, 5)], txn_id=1)
        t2 = make_txn(writes=[(0, 5)], txn_id=2)
        outs = [
            type("O", (), {"verdict": COMMITTED, "txn_id": 2,
                           "commit_position": 9})(),
            type("O", (), {"verdict": COMMITTED, "txn_id": 1,
                           "commit_position": 10})(),
        ]
        final = replay(outs, {1: t1, 2: t2})
        assert final[(0, 5)] == (1, 10)


def test_fifo_channel_reorders():
    ch = FifoChannel()
    assert ch.push(2, "c") == []
    assert ch.push(0, "a") == ["a"]
    assert ch.push(1, "b") == ["b", "c"]
    assert ch.push(3, "d") == ["d"]
