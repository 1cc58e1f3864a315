"""Core domain model: regions, partitions, placement, transactions, and the
access-pattern classifier.

A transaction is classified along two orthogonal axes:

* partition span -- single-partition (SP) vs. multi-partition (MP);
* home span -- where the primary copies of the touched partitions live
  relative to the submitting region: local single-home (LSH), foreign
  single-home (FSH), or multi-home (MH).

Only primary copies matter for the home span; replica placement never
affects classification.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import ConfigError

KeyRef = tuple[int, int]  # (partition index, key id)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed derived from arbitrary hashable parts.

    Used everywhere a child RNG stream is split off a root seed, so that
    runs are reproducible from a single configured seed.
    """
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


class PartitionSpan(str, Enum):
    SP = "SP"
    MP = "MP"


class HomeSpan(str, Enum):
    LSH = "LSH"
    FSH = "FSH"
    MH = "MH"


@dataclass(frozen=True)
class TxnClass:
    partition_span: PartitionSpan
    home_span: HomeSpan

    @property
    def label(self) -> str:
        return f"{self.partition_span.value}-{self.home_span.value}"


@dataclass(frozen=True)
class PlacementMap:
    """Immutable partition -> home-region (and replica regions) assignment.

    ``homes[p]`` is the region holding the primary copy of partition ``p``;
    ``replicas[p]`` lists the regions holding secondary copies (home
    excluded, all distinct).
    """

    homes: tuple[int, ...]
    replicas: tuple[tuple[int, ...], ...]
    n_regions: int

    def __post_init__(self):
        if len(self.replicas) != len(self.homes):
            raise ConfigError("replicas must be given for every partition")
        for p, home in enumerate(self.homes):
            if not 0 <= home < self.n_regions:
                raise ConfigError(f"partition {p} homed in unknown region {home}")
            reps = self.replicas[p]
            if home in reps:
                raise ConfigError(f"partition {p} replica set contains its home region")
            if len(set(reps)) != len(reps):
                raise ConfigError(f"partition {p} has duplicate replica regions")
            for r in reps:
                if not 0 <= r < self.n_regions:
                    raise ConfigError(f"partition {p} replicated to unknown region {r}")

    @property
    def n_partitions(self) -> int:
        return len(self.homes)

    def home(self, partition: int) -> int:
        if not 0 <= partition < len(self.homes):
            raise ConfigError(f"unknown partition {partition}")
        return self.homes[partition]

    def to_json(self) -> str:
        # Stable field order; golden-file tests depend on it.
        return json.dumps(
            {
                "partitions": self.n_partitions,
                "homes": list(self.homes),
                "replicas": [list(r) for r in self.replicas],
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "PlacementMap":
        obj = json.loads(text)
        homes = tuple(obj["homes"])
        if len(homes) != obj["partitions"]:
            raise ConfigError("placement JSON: homes length != partitions")
        n_regions = (max(homes) + 1) if homes else 0
        replicas = tuple(tuple(r) for r in obj["replicas"])
        for reps in replicas:
            for r in reps:
                n_regions = max(n_regions, r + 1)
        return cls(homes=homes, replicas=replicas, n_regions=n_regions)


class PlacementIndex:
    """Per-region partition lists, precomputed once per placement.

    Both the workload generators and the protocol models need "which
    partitions are homed in region r" lookups on hot paths.
    """

    def __init__(self, placement: PlacementMap):
        self.placement = placement
        by_region: list[list[int]] = [[] for _ in range(placement.n_regions)]
        for p, home in enumerate(placement.homes):
            by_region[home].append(p)
        self.by_region = [tuple(ps) for ps in by_region]
        self.nonempty_regions = tuple(
            r for r in range(placement.n_regions) if by_region[r]
        )

    def partitions_in(self, region: int) -> tuple[int, ...]:
        return self.by_region[region]


@dataclass(slots=True)
class Transaction:
    """One benchmark transaction: who submitted it, from where, and the
    exact (partition, key) sets it reads and writes."""

    id: int
    origin: int
    read_set: tuple[KeyRef, ...]
    write_set: tuple[KeyRef, ...]
    logic_tag: str
    submit_time: int  # simulated nanoseconds
    value_bytes: int = 0  # payload size per written key
    txn_class: TxnClass | None = None

    def __post_init__(self):
        if not self.read_set and not self.write_set:
            raise ConfigError(f"transaction {self.id}: empty read and write set")

    @property
    def read_only(self) -> bool:
        return not self.write_set

    @property
    def op_count(self) -> int:
        return len(self.read_set) + len(self.write_set)

    def partitions(self) -> frozenset[int]:
        return frozenset(p for p, _ in self.read_set) | frozenset(
            p for p, _ in self.write_set
        )


def region_set(txn: Transaction, placement: PlacementMap) -> frozenset[int]:
    """The set of regions whose primary copies the transaction touches."""
    homes = placement.homes
    n = len(homes)
    out = set()
    for p, _ in txn.read_set:
        if p >= n or p < 0:
            raise ConfigError(f"transaction {txn.id} touches unknown partition {p}")
        out.add(homes[p])
    for p, _ in txn.write_set:
        if p >= n or p < 0:
            raise ConfigError(f"transaction {txn.id} touches unknown partition {p}")
        out.add(homes[p])
    return frozenset(out)


def classify(txn: Transaction, placement: PlacementMap) -> TxnClass:
    """Classify a transaction's access pattern against a placement.

    Pure and total over valid inputs: LSH when every touched partition is
    homed in the origin region, FSH when all are homed in one other region,
    MH when two or more regions are involved.
    """
    homes = placement.homes
    n = len(homes)
    parts = set()
    regions = set()
    for p, _ in txn.read_set:
        if p >= n or p < 0:
            raise ConfigError(f"transaction {txn.id} touches unknown partition {p}")
        parts.add(p)
        regions.add(homes[p])
    for p, _ in txn.write_set:
        if p >= n or p < 0:
            raise ConfigError(f"transaction {txn.id} touches unknown partition {p}")
        parts.add(p)
        regions.add(homes[p])
    span = PartitionSpan.SP if len(parts) == 1 else PartitionSpan.MP
    if len(regions) >= 2:
        home = HomeSpan.MH
    elif txn.origin in regions:
        home = HomeSpan.LSH
    else:
        home = HomeSpan.FSH
    return TxnClass(span, home)


def _validate_weights(weights: Sequence[float], n_regions: int) -> tuple[float, ...]:
    if len(weights) != n_regions:
        raise ConfigError(
            f"weight vector has {len(weights)} entries for {n_regions} regions"
        )
    if any(w < 0 for w in weights):
        raise ConfigError("region weights must be non-negative")
    total = sum(weights)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"region weights sum to {total!r}, expected 1.0")
    return tuple(weights)


def assign_homes(
    partition_count: int,
    n_regions: int,
    seed: int,
    *,
    weights: Sequence[float] | None = None,
    replication: int | str = 0,
    replica_regions: Sequence[int] | None = None,
) -> PlacementMap:
    """Draw a home region for every partition, plus replica regions.

    Homes are uniform by default, or follow an explicit weight vector
    (used by the server geo-distribution scenario). Replicas are picked
    round-robin over the remaining eligible regions: ``replication`` is a
    count, or ``"full"`` for one replica in every other eligible region.
    Deterministic for a fixed seed.
    """
    if partition_count < 1:
        raise ConfigError("partition_count must be >= 1")
    if n_regions < 1:
        raise ConfigError("need at least one region")
    if weights is None:
        if partition_count < n_regions:
            raise ConfigError(
                f"{partition_count} partitions over {n_regions} regions: supply a "
                "weight vector or at least one partition per region"
            )
        rng = random.Random(derive_seed(seed, "homes"))
        homes = tuple(rng.randrange(n_regions) for _ in range(partition_count))
    else:
        w = _validate_weights(weights, n_regions)
        cum = []
        acc = 0.0
        for x in w:
            acc += x
            cum.append(acc)
        cum[-1] = 1.0
        rng = random.Random(derive_seed(seed, "homes"))
        import bisect

        homes = tuple(
            bisect.bisect_left(cum, rng.random()) for _ in range(partition_count)
        )

    eligible = (
        tuple(range(n_regions)) if replica_regions is None else tuple(replica_regions)
    )
    replicas = []
    for p, home in enumerate(homes):
        others = [r for r in eligible if r != home]
        if replication == "full":
            reps = tuple(others)
        else:
            k = int(replication)
            if k < 0:
                raise ConfigError("replication count must be >= 0")
            k = min(k, len(others))
            # rotate the candidate ring by partition index for balance
            if others:
                start = p % len(others)
                reps = tuple(others[(start + j) % len(others)] for j in range(k))
            else:
                reps = ()
        replicas.append(reps)
    return PlacementMap(homes=homes, replicas=tuple(replicas), n_regions=n_regions)


DESK_REGION_LABELS = ("us-west", "us-east", "eu-west", "ap-northeast")
PAPER_REGION_LABELS = (
    "us-west-1",
    "us-west-2",
    "us-east-1",
    "us-east-2",
    "eu-west-1",
    "eu-west-2",
    "ap-northeast-1",
    "ap-northeast-2",
)


def default_region_labels(n: int) -> tuple[str, ...]:
    if n <= len(DESK_REGION_LABELS):
        return DESK_REGION_LABELS[:n]
    if n <= len(PAPER_REGION_LABELS):
        return PAPER_REGION_LABELS[:n]
    return tuple(f"region-{i}" for i in range(n))


@dataclass(frozen=True)
class Topology:
    """Regions, per-region server counts, and the partition universe.

    Server ids are flat integers; ``server_id(region, idx)`` and
    ``region_of(sid)`` convert between the flat id and (region, index).
    Within any region that hosts a copy of partition ``p``, the copy lives
    on server index ``p % servers_in_region``.
    """

    region_labels: tuple[str, ...]
    servers_per_region: tuple[int, ...]
    n_partitions: int
    _offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.servers_per_region) != len(self.region_labels):
            raise ConfigError("servers_per_region must match region count")
        if len(set(self.region_labels)) != len(self.region_labels):
            raise ConfigError("region labels must be unique")
        if any(s < 0 for s in self.servers_per_region):
            raise ConfigError("server counts must be non-negative")
        if self.n_partitions < 1:
            raise ConfigError("need at least one partition")
        offsets = []
        acc = 0
        for s in self.servers_per_region:
            offsets.append(acc)
            acc += s
        object.__setattr__(self, "_offsets", tuple(offsets))

    @classmethod
    def uniform(
        cls,
        n_regions: int,
        servers_per_region: int,
        n_partitions: int,
        labels: Sequence[str] | None = None,
    ) -> "Topology":
        if not 2 <= n_regions <= 64:
            raise ConfigError("region count must be in [2, 64]")
        if servers_per_region < 1:
            raise ConfigError("servers_per_region must be >= 1")
        lab = tuple(labels) if labels else default_region_labels(n_regions)
        return cls(lab, (servers_per_region,) * n_regions, n_partitions)

    @property
    def n_regions(self) -> int:
        return len(self.region_labels)

    @property
    def n_servers(self) -> int:
        return self._offsets[-1] + self.servers_per_region[-1]

    def server_id(self, region: int, idx: int) -> int:
        if idx >= self.servers_per_region[region]:
            raise ConfigError(
                f"server index {idx} out of range for region {region} "
                f"({self.servers_per_region[region]} servers)"
            )
        return self._offsets[region] + idx

    def region_of(self, sid: int) -> int:
        offs = self._offsets
        lo, hi = 0, len(offs) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if offs[mid] <= sid:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def servers_in(self, region: int) -> range:
        base = self._offsets[region]
        return range(base, base + self.servers_per_region[region])

    def regions_with_servers(self) -> tuple[int, ...]:
        return tuple(r for r in range(self.n_regions) if self.servers_per_region[r])

    def shard_server(self, region: int, partition: int) -> int:
        """The server hosting partition ``partition``'s copy inside ``region``."""
        count = self.servers_per_region[region]
        if count == 0:
            raise ConfigError(f"region {region} has no servers")
        return self._offsets[region] + partition % count

    def home_server(self, placement: PlacementMap, partition: int) -> int:
        return self.shard_server(placement.home(partition), partition)


def composition(classes: Iterable[TxnClass]) -> dict[str, float]:
    """LSH/FSH/MH shares of an iterable of classes (fractions of total)."""
    counts = {HomeSpan.LSH: 0, HomeSpan.FSH: 0, HomeSpan.MH: 0}
    total = 0
    for c in classes:
        counts[c.home_span] += 1
        total += 1
    if total == 0:
        return {"LSH": 0.0, "FSH": 0.0, "MH": 0.0}
    return {k.value: v / total for k, v in counts.items()}
