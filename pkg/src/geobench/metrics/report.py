"""Per-run metric collection and the RunReport bundle.

One collector per engine, mutated only from the engine loop. Reports are
plain data after finalization: counts reconcile exactly (submitted =
committed + aborted + rejected + in-flight), latency splits by transaction
class, egress comes straight from the engine's byte ledger, and the cost
block applies the pricing model over the measurement window (warm-up
excluded).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..core import HomeSpan, Topology, Transaction
from ..errors import ConfigError, EngineAssertionError
from ..netsim.engine import Engine, NS_PER_S
from ..protocols.base import ABORTED, COMMITTED, Outcome, REJECTED
from .cost import CostBreakdown, CostInputs, cost_per_txn
from .histogram import LatencyHistogram

DEFAULT_WARMUP_S = 15.0


@dataclass(frozen=True)
class CostPricing:
    server_price_hr: float = 1.120  # a 16-vCPU memory-optimized instance
    transfer_price_gb: float = 0.02
    storage_price_gb_hr: float = 0.0001


class MetricsCollector:
    def __init__(
        self,
        topology: Topology,
        warmup_s: float = DEFAULT_WARMUP_S,
        bin_s: float = 1.0,
        keep_outcomes: bool = True,
    ):
        if bin_s <= 0:
            raise ConfigError("bin size must be positive")
        self.topology = topology
        self.warmup_s = warmup_s
        self.bin_ns = int(bin_s * NS_PER_S)
        self.submitted = 0
        self.committed = 0
        self.aborted = 0
        self.rejected = 0
        self._terminal: set[int] = set()
        self.bins: list[int] = []
        self.hists: dict[tuple, LatencyHistogram] = {}
        self.class_counts = {s: 0 for s in HomeSpan}
        self.class_aborts = {s: 0 for s in HomeSpan}
        self.abort_reasons: dict[str, int] = {}
        self.committed_write_bytes = 0
        self.keep_outcomes = keep_outcomes
        self.outcomes: list[dict] = []
        # oracle checks flip this on to retain (Outcome, Transaction) pairs
        self.keep_raw = False
        self.raw: list[tuple[Outcome, Transaction]] = []

    def note_submitted(self, txn: Transaction) -> None:
        self.submitted += 1

    def record(self, outcome: Outcome, txn: Transaction) -> None:
        if outcome.txn_id in self._terminal:
            raise EngineAssertionError(
                f"duplicate terminal outcome for transaction {outcome.txn_id}"
            )
        self._terminal.add(outcome.txn_id)
        span = outcome.txn_class.home_span if outcome.txn_class else None
        if outcome.verdict == COMMITTED:
            self.committed += 1
            if span is not None:
                self.class_counts[span] += 1
            b = outcome.commit_time // self.bin_ns
            while len(self.bins) <= b:
                self.bins.append(0)
            self.bins[b] += 1
            latency = outcome.commit_time - outcome.submit_time
            key = (
                span.value if span else "?",
                "ro" if txn.read_only else "rw",
                txn.logic_tag,
            )
            hist = self.hists.get(key)
            if hist is None:
                hist = self.hists[key] = LatencyHistogram()
            hist.add(latency)
            self.committed_write_bytes += len(txn.write_set) * txn.value_bytes
        elif outcome.verdict == ABORTED:
            self.aborted += 1
            if span is not None:
                self.class_aborts[span] += 1
            reason = outcome.reason or "unknown"
            self.abort_reasons[reason] = self.abort_reasons.get(reason, 0) + 1
        elif outcome.verdict == REJECTED:
            self.rejected += 1
        else:
            raise EngineAssertionError(f"unknown verdict {outcome.verdict!r}")
        if self.keep_raw:
            self.raw.append((outcome, txn))
        if self.keep_outcomes:
            self.outcomes.append(
                {
                    "txn_id": outcome.txn_id,
                    "class": outcome.txn_class.label if outcome.txn_class else None,
                    "verdict": outcome.verdict,
                    "reason": outcome.reason,
                    "submit_time_ns": outcome.submit_time,
                    "commit_time_ns": outcome.commit_time,
                    "origin": outcome.origin,
                }
            )

    def class_hist(self, span: str) -> LatencyHistogram:
        merged = LatencyHistogram()
        for (s, _, _), h in self.hists.items():
            if s == span:
                merged.merge(h)
        return merged

    def dump_outcomes(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for rec in self.outcomes:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    # -- finalization ---------------------------------------------------------

    def finalize(
        self,
        engine: Engine,
        duration_s: float,
        pricing: CostPricing | None = None,
        replication_factor: float = 1.0,
        label: dict | None = None,
    ) -> "RunReport":
        pricing = pricing or CostPricing()
        window_s = max(duration_s - self.warmup_s, 1e-9)
        if duration_s <= self.warmup_s:
            window_s = duration_s
        first_bin = int(self.warmup_s * NS_PER_S) // self.bin_ns
        if duration_s <= self.warmup_s:
            first_bin = 0
        committed_in_window = sum(self.bins[first_bin:])
        throughput = committed_in_window / window_s
        billed = engine.billed_bytes()
        billed_gb = billed / 1e9
        transfer_gb_per_hr = billed_gb / duration_s * 3600.0
        storage_gb = self.committed_write_bytes * replication_factor / 1e9
        cost = cost_per_txn(
            CostInputs(
                n_servers=self.topology.n_servers,
                server_price_hr=pricing.server_price_hr,
                transfer_gb_per_hr=transfer_gb_per_hr,
                transfer_price_gb=pricing.transfer_price_gb,
                storage_gb=storage_gb,
                storage_price_gb_hr=pricing.storage_price_gb_hr,
                throughput_tps=throughput,
            )
        )
        per_class = {}
        overall = LatencyHistogram()
        for span in HomeSpan:
            h = self.class_hist(span.value)
            overall.merge(h)
            per_class[span.value] = {
                "count": int(h.total),
                "aborted": self.class_aborts[span],
                "p50_ms": h.percentile_ms(0.50),
                "p99_ms": h.percentile_ms(0.99),
            }
        for (s, _, _), h in self.hists.items():
            if s not in (x.value for x in HomeSpan):
                overall.merge(h)
        per_class["ALL"] = {
            "count": int(overall.total),
            "aborted": self.aborted,
            "p50_ms": overall.percentile_ms(0.50),
            "p99_ms": overall.percentile_ms(0.99),
        }
        busy_div = max(duration_s, 1e-9) * NS_PER_S * engine.model.executors
        utilization = {
            "busy_fraction": [s.busy_ns / busy_div for s in engine.servers],
            "peak_inflight": [s.peak_inflight for s in engine.servers],
            "peak_queue": [s.peak_queue for s in engine.servers],
            "sent_bytes_per_s": [s.sent_bytes / max(duration_s, 1e-9) for s in engine.servers],
        }
        in_flight = self.submitted - self.committed - self.aborted - self.rejected
        return RunReport(
            label=label or {},
            duration_s=duration_s,
            warmup_s=self.warmup_s,
            submitted=self.submitted,
            committed=self.committed,
            aborted=self.aborted,
            rejected=self.rejected,
            in_flight=in_flight,
            committed_tps=throughput,
            bins=list(self.bins),
            per_class=per_class,
            abort_reasons=dict(self.abort_reasons),
            egress_matrix=[list(row) for row in engine.egress],
            billed_gb=billed_gb,
            conservation=engine.conservation(),
            cost_fixed_per_txn=cost.fixed_per_txn,
            cost_transfer_per_txn=cost.transfer_per_txn,
            cost_total_per_txn=cost.total_per_txn,
            cost_infinite=cost.infinite,
            utilization=utilization,
            trace_hash=engine.trace_hash,
        )


@dataclass
class RunReport:
    label: dict
    duration_s: float
    warmup_s: float
    submitted: int
    committed: int
    aborted: int
    rejected: int
    in_flight: int
    committed_tps: float
    bins: list[int]
    per_class: dict
    abort_reasons: dict
    egress_matrix: list[list[int]]
    billed_gb: float
    conservation: dict
    cost_fixed_per_txn: float
    cost_transfer_per_txn: float
    cost_total_per_txn: float
    cost_infinite: bool
    utilization: dict
    trace_hash: str

    @property
    def abort_rate(self) -> float:
        done = self.committed + self.aborted + self.rejected
        return self.aborted / done if done else 0.0

    @property
    def cents_per_10k(self) -> float:
        if self.cost_infinite:
            return math.inf
        return self.cost_total_per_txn * 10_000 * 100

    def to_json(self) -> str:
        obj = dict(self.__dict__)

        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return v

        obj = {
            k: clean(v) if not isinstance(v, dict) else v for k, v in obj.items()
        }
        return json.dumps(obj, indent=2, default=str)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        obj = json.loads(text)
        for k in ("cost_fixed_per_txn", "cost_transfer_per_txn", "cost_total_per_txn"):
            if obj.get(k) == "inf":
                obj[k] = math.inf
        return cls(**obj)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "RunReport":
        p = Path(path)
        try:
            return cls.from_json(p.read_text())
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            raise ConfigError(f"corrupt report file {p}: {exc}") from exc


CSV_COLUMNS = [
    "scenario",
    "protocol",
    "param",
    "committed_tps",
    "p50_ms_lsh",
    "p50_ms_fsh",
    "p50_ms_mh",
    "p99_ms_lsh",
    "p99_ms_fsh",
    "p99_ms_mh",
    "abort_rate",
    "billed_gb",
    "cost_fixed",
    "cost_transfer",
    "cost_per_10k_txn",
]


def _csv_rows(reports: Iterable[RunReport]):
    for r in reports:
        pc = r.per_class
        yield [
            r.label.get("scenario", ""),
            r.label.get("protocol", ""),
            r.label.get("param", ""),
            f"{r.committed_tps:.3f}",
            pc["LSH"]["p50_ms"],
            pc["FSH"]["p50_ms"],
            pc["MH"]["p50_ms"],
            pc["LSH"]["p99_ms"],
            pc["FSH"]["p99_ms"],
            pc["MH"]["p99_ms"],
            f"{r.abort_rate:.6f}",
            f"{r.billed_gb:.9f}",
            r.cost_fixed_per_txn,
            r.cost_transfer_per_txn,
            r.cents_per_10k,
        ]


def write_csv(reports: Iterable[RunReport], path: str | Path) -> int:
    """One row per (scenario point, protocol); returns the row count."""
    rows = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in _csv_rows(reports):
            writer.writerow(row)
            rows += 1
    return rows


def csv_text(reports: Iterable[RunReport]) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for row in _csv_rows(reports):
        writer.writerow(row)
    return buf.getvalue()
