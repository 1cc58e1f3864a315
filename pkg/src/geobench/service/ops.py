"""Service-layer operations shared by the HTTP app and the CLI.

The CLI is a thin client of these functions; the FastAPI app exposes the
same functions over HTTP, so both paths run identical code.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Optional

from ..core import PlacementMap, classify, derive_seed
from ..errors import ConfigError
from ..metrics.cost import CostInputs, cost_per_txn
from ..metrics.report import RunReport
from ..scenarios.runner import build_placement, run_scenario, run_single
from ..scenarios.spec import ScenarioSpec
from ..config import RunConfig
from ..workload.stream import (
    OpenArrival,
    WorkloadStream,
    txn_from_record,
    txn_to_record,
)
from .models import (
    ClassifyRequest,
    ClassifyResponse,
    CostRequest,
    CostResponse,
    GenerateRequest,
    GenerateResponse,
    RunRequest,
)

_GEN_RATE_TPS = 1000.0  # synthetic pacing for pregenerated streams


def op_generate(
    req: GenerateRequest, out_path: Optional[str | Path] = None
) -> GenerateResponse:
    """Generate a transaction stream; optionally persist it as ndjson."""
    cfg = RunConfig(workload=req.workload, topology=req.topology, seed=req.seed)
    if req.workload.kind == "replay":
        raise ConfigError("generate needs a ycsb or tpcc workload")
    topo_section = req.topology
    if req.workload.kind == "tpcc":
        topo_section = topo_section.model_copy(
            update={"partitions": req.workload.tpcc.warehouses}
        )
    topology = topo_section.build()
    placement = build_placement(cfg, topology, replication=0)
    wl = (
        req.workload.tpcc.build()
        if req.workload.kind == "tpcc"
        else req.workload.ycsb.build()
    )
    live = topology.regions_with_servers()
    origin_weights = req.topology.region_weights
    if origin_weights is None and req.workload.kind == "ycsb":
        w = [1.0 / len(live) if r in live else 0.0 for r in range(topology.n_regions)]
        total = sum(w)
        origin_weights = [x / total for x in w]
    stream = WorkloadStream(
        config=wl,
        placement=placement,
        arrival=OpenArrival(rate_tps=_GEN_RATE_TPS, spacing="fixed"),
        duration_s=req.count / _GEN_RATE_TPS,
        seed=derive_seed(req.seed, "workload"),
        origin_weights=tuple(origin_weights) if origin_weights else None,
    )
    digest = hashlib.sha256()
    class_counts: dict[str, int] = {"LSH": 0, "FSH": 0, "MH": 0}
    type_counts: dict[str, int] = {}
    inline: list[dict] = []
    fh = open(out_path, "w") if out_path is not None else None
    count = 0
    try:
        for txn in stream.transactions():
            rec = txn_to_record(txn)
            line = json.dumps(rec, separators=(",", ":"))
            digest.update(line.encode())
            digest.update(b"\n")
            if fh is not None:
                fh.write(line)
                fh.write("\n")
            class_counts[txn.txn_class.home_span.value] += 1
            type_counts[txn.logic_tag] = type_counts.get(txn.logic_tag, 0) + 1
            if len(inline) < req.include:
                inline.append(rec)
            count += 1
            if count >= req.count:
                break
    finally:
        if fh is not None:
            fh.close()
    return GenerateResponse(
        count=count,
        composition_pct={k: 100.0 * v / count for k, v in class_counts.items()},
        type_mix_pct={k: 100.0 * v / count for k, v in sorted(type_counts.items())},
        stream_sha256=digest.hexdigest(),
        placement=json.loads(placement.to_json()),
        transactions=inline,
    )


def op_classify(req: ClassifyRequest) -> ClassifyResponse:
    placement = PlacementMap.from_json(json.dumps(req.placement))
    classes: list[str] = []
    counts = {"LSH": 0, "FSH": 0, "MH": 0}
    mismatches = 0
    for rec in req.transactions:
        txn = txn_from_record(rec)
        cls = classify(txn, placement)
        classes.append(cls.label)
        counts[cls.home_span.value] += 1
        if txn.txn_class is not None and txn.txn_class != cls:
            mismatches += 1
    total = max(len(classes), 1)
    return ClassifyResponse(
        classes=classes,
        composition_pct={k: 100.0 * v / total for k, v in counts.items()},
        mismatches=mismatches,
    )


def op_cost(req: CostRequest) -> CostResponse:
    breakdown = cost_per_txn(CostInputs(**req.model_dump()))

    def f(v: float) -> float | None:
        return None if math.isinf(v) else v

    return CostResponse(
        fixed_per_txn=f(breakdown.fixed_per_txn),
        transfer_per_txn=f(breakdown.transfer_per_txn),
        total_per_txn=f(breakdown.total_per_txn),
        infinite=breakdown.infinite,
        cents_per_10k=None if breakdown.infinite else breakdown.cents_per_10k,
        note=breakdown.note,
    )


def op_run(req: RunRequest) -> list[RunReport]:
    if req.config is not None:
        label = {"scenario": "single", "protocol": req.config.protocol, "param": ""}
        return [run_single(req.config, label=label)]
    return run_scenario(req.scenario, workers=req.workers, point=req.point)
