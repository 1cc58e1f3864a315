"""Serial replay oracle for serializability checking.

Replays committed transactions one at a time, in commit-position order,
over a single flat store, then compares the result against the state each
server actually holds for the partitions it hosts.
"""

from __future__ import annotations

from ..core import PlacementMap, Topology, Transaction
from ..errors import EngineAssertionError
from .base import COMMITTED, Outcome, ProtocolModel


def replay(
    outcomes: list[Outcome],
    txns_by_id: dict[int, Transaction],
    initial: dict | None = None,
) -> dict:
    """Final key -> (writer txn id, commit position) after serial replay."""
    committed = [o for o in outcomes if o.verdict == COMMITTED]
    for o in committed:
        if o.commit_position is None:
            raise EngineAssertionError(
                f"committed outcome without commit position: txn {o.txn_id}"
            )
    committed.sort(key=lambda o: (o.commit_position, o.txn_id))
    store = dict(initial) if initial else {}
    for o in committed:
        txn = txns_by_id.get(o.txn_id)
        if txn is None:
            raise EngineAssertionError(f"outcome for unknown transaction {o.txn_id}")
        for ref in txn.write_set:
            store[ref] = (txn.id, o.commit_position)
    return store


def hosted_partitions(
    protocol: ProtocolModel, topology: Topology, placement: PlacementMap, sid: int
) -> set[int]:
    """Partitions whose data the given server is expected to hold."""
    region = topology.region_of(sid)
    out = set()
    for p in range(placement.n_partitions):
        if topology.shard_server(region, p) != sid:
            continue
        mode = protocol.default_replication
        if mode == "full":
            out.add(p)
        elif placement.homes[p] == region or region in placement.replicas[p]:
            out.add(p)
    return out


def state_divergence(
    protocol: ProtocolModel,
    topology: Topology,
    placement: PlacementMap,
    outcomes: list[Outcome],
    txns_by_id: dict[int, Transaction],
) -> list[str]:
    """Compare every server's hosted state against the serial replay.

    Returns human-readable mismatch descriptions (empty means the run was
    serializable). Must be called at quiescence on a fault-free run.
    """
    expected = replay(outcomes, txns_by_id)
    problems = []
    for sid in range(topology.n_servers):
        hosted = hosted_partitions(protocol, topology, placement, sid)
        if not hosted:
            continue
        want = {ref: v for ref, v in expected.items() if ref[0] in hosted}
        got = protocol.store(sid).data
        got = {ref: v for ref, v in got.items() if ref[0] in hosted}
        if got != want:
            missing = set(want) - set(got)
            extra = set(got) - set(want)
            wrong = {k for k in set(want) & set(got) if want[k] != got[k]}
            problems.append(
                f"server {sid}: {len(missing)} missing, {len(extra)} extra, "
                f"{len(wrong)} wrong-writer keys"
            )
    return problems
