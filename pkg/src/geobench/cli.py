"""geobench command-line interface.

A thin client over the service layer: every command builds the same
request models the HTTP API accepts and either executes them in-process
(default) or sends them to a running service via --server.

Exit codes: 0 success, 1 cross-check failure, 2 configuration error,
3 internal engine assertion.
"""

from __future__ import annotations

import functools
import json
import logging
import os
import sys
import time
from pathlib import Path

import click

from . import __version__
from .config import RunConfig, desk_config, load_run_config, paper_config
from .errors import ConfigError, EngineAssertionError, GeobenchError
from .metrics.report import RunReport, write_csv
from .protocols import available
from .scenarios.spec import DEFAULT_AXES, ScenarioSpec, load_scenario
from .service.models import (
    ClassifyRequest,
    GenerateRequest,
    RunRequest,
)
from .service.ops import op_classify, op_generate, op_run
from .workload.stream import load_stream, txn_to_record

log = logging.getLogger("geobench")


def _setup_logging() -> None:
    level = os.environ.get("GEOBENCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EngineAssertionError as exc:
            click.echo(f"internal assertion: {exc}", err=True)
            sys.exit(3)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(2)
        except GeobenchError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
@click.version_option(version=__version__, prog_name="geobench")
def main():
    """Deterministic geo-distributed OLTP protocol benchmarking."""
    _setup_logging()


def _base_config(config_path: str | None, preset: str | None, seed: int | None) -> RunConfig:
    if config_path is not None:
        cfg = load_run_config(config_path)
    elif preset == "paper":
        cfg = paper_config()
    else:
        cfg = desk_config()
    if seed is not None:
        cfg.seed = seed
    return cfg


# -- generate -----------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=str, default=None, help="RunConfig JSON")
@click.option("--preset", type=click.Choice(["desk", "paper"]), default=None)
@click.option("--count", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, required=True, help="stream output (ndjson)")
@click.option("--placement-out", type=str, default=None, help="placement JSON output")
@click.option("--server", type=str, default=None, help="remote service URL")
@handle_errors
def generate(config_path, preset, count, seed, out, placement_out, server):
    """Pregenerate a transaction stream and print its composition."""
    cfg = _base_config(config_path, preset, seed)
    req = GenerateRequest(
        workload=cfg.workload,
        topology=cfg.topology,
        count=count,
        seed=cfg.seed,
    )
    if server is not None:
        resp_obj = _post(server, "/generate", req.model_dump())
        from .service.models import GenerateResponse

        resp = GenerateResponse.model_validate(resp_obj)
        Path(out).write_text(
            "".join(json.dumps(t, separators=(",", ":")) + "\n" for t in resp.transactions)
        )
    else:
        resp = op_generate(req, out_path=out)
    if placement_out is not None:
        Path(placement_out).write_text(json.dumps(resp.placement, separators=(",", ":")))
    comp = resp.composition_pct
    click.echo(
        f"generated {resp.count} transactions -> {out}\n"
        f"composition: LSH {comp['LSH']:.2f}%  FSH {comp['FSH']:.2f}%  MH {comp['MH']:.2f}%\n"
        f"types: {', '.join(f'{k} {v:.2f}%' for k, v in resp.type_mix_pct.items())}\n"
        f"stream sha256: {resp.stream_sha256}"
    )


# -- classify -------------------------------------------------------------------


@main.command()
@click.option("--stream", "stream_path", type=str, required=True)
@click.option("--placement", "placement_path", type=str, required=True)
@click.option("--server", type=str, default=None)
@handle_errors
def classify(stream_path, placement_path, server):
    """Re-derive every transaction's class and cross-check the stream."""
    p = Path(placement_path)
    if not p.exists():
        raise ConfigError(f"placement file not found: {p}")
    sp = Path(stream_path)
    if not sp.exists():
        raise ConfigError(f"stream file not found: {sp}")
    txns = load_stream(sp)
    req = ClassifyRequest(
        placement=json.loads(p.read_text()),
        transactions=[txn_to_record(t) for t in txns],
    )
    if server is not None:
        from .service.models import ClassifyResponse

        resp = ClassifyResponse.model_validate(_post(server, "/classify", req.model_dump()))
    else:
        resp = op_classify(req)
    comp = resp.composition_pct
    click.echo(
        f"classified {len(resp.classes)} transactions\n"
        f"composition: LSH {comp['LSH']:.2f}%  FSH {comp['FSH']:.2f}%  MH {comp['MH']:.2f}%\n"
        f"mismatches vs recorded classes: {resp.mismatches}"
    )
    if resp.mismatches:
        sys.exit(1)


# -- run ---------------------------------------------------------------------------


def _resolve_scenario(value: str, base: RunConfig) -> ScenarioSpec:
    if value in DEFAULT_AXES:
        return ScenarioSpec(scenario=value, base=base)
    return load_scenario(value)


@main.command()
@click.option("--config", "config_path", type=str, default=None, help="RunConfig JSON")
@click.option("--scenario", "scenario_ref", type=str, default=None,
              help="scenario file, or a scenario kind name")
@click.option("--preset", type=click.Choice(["desk", "paper"]), default=None)
@click.option("--point", type=int, default=None, help="run a single sweep point")
@click.option("--workers", type=int, default=None, help="parallel sweep workers")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, required=True, help="report output directory")
@click.option("--server", type=str, default=None)
@handle_errors
def run(config_path, scenario_ref, preset, point, workers, seed, out, server):
    """Execute a run or a scenario sweep; write report JSONs + aggregate CSV."""
    base = _base_config(config_path, preset, seed)
    if workers is None:
        workers = os.cpu_count() or 1
    if scenario_ref is not None:
        spec = _resolve_scenario(scenario_ref, base)
        if config_path is None and preset is not None:
            spec = spec.model_copy(update={"base": base})
        req = RunRequest(scenario=spec, point=point, workers=workers)
    else:
        req = RunRequest(config=base)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if server is not None:
        reports = _remote_run(server, req)
    else:
        reports = op_run(req)
    for i, rep in enumerate(reports):
        rep.save(out_dir / f"report_{i:03d}.json")
    write_csv(reports, out_dir / "aggregate.csv")
    click.echo(f"wrote {len(reports)} report(s) + aggregate.csv -> {out_dir}")
    for rep in reports:
        lab = rep.label
        click.echo(
            f"  [{lab.get('scenario', '?')}/{lab.get('protocol', '?')}"
            f" param={lab.get('param', '')}] committed={rep.committed}"
            f" tps={rep.committed_tps:.1f} aborts={rep.aborted}"
            f" billed_gb={rep.billed_gb:.4f}"
        )


# -- report ------------------------------------------------------------------------


@main.command()
@click.option("--in", "in_dir", type=str, required=True, help="directory of RunReports")
@click.option("--out", "out_dir", type=str, default=None, help="CSV output directory")
@handle_errors
def report(in_dir, out_dir):
    """Regroup report JSONs into per-scenario plot-data CSVs."""
    src = Path(in_dir)
    if not src.is_dir():
        raise ConfigError(f"not a directory: {src}")
    files = sorted(src.glob("report_*.json")) or sorted(src.glob("*.json"))
    files = [f for f in files if not f.name.startswith("aggregate")]
    if not files:
        raise ConfigError(f"no report JSONs in {src}")
    reports = [RunReport.load(f) for f in files]
    dst = Path(out_dir) if out_dir else src
    dst.mkdir(parents=True, exist_ok=True)
    by_kind: dict[str, list[RunReport]] = {}
    for r in reports:
        by_kind.setdefault(r.label.get("scenario", "run"), []).append(r)
    for kind, group in sorted(by_kind.items()):
        path = dst / f"{kind}.csv"
        rows = write_csv(group, path)
        click.echo(f"{path}: {rows} row(s)")


# -- misc -----------------------------------------------------------------------------


@main.command("list-protocols")
@click.option("--server", type=str, default=None)
@handle_errors
def list_protocols(server):
    """List protocol models selectable in run configs."""
    if server is not None:
        names = _get(server, "/protocols")["protocols"]
    else:
        names = available()
    for name in names:
        click.echo(name)


@main.command()
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
@handle_errors
def serve(host, port):
    """Start the benchmark service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


# -- remote plumbing -----------------------------------------------------------------


def _client(server: str):
    import httpx

    return httpx.Client(base_url=server, timeout=600.0)


def _post(server: str, path: str, payload: dict) -> dict:
    with _client(server) as client:
        resp = client.post(path, json=payload)
        if resp.status_code == 422:
            raise ConfigError(resp.json().get("detail", resp.text))
        resp.raise_for_status()
        return resp.json()


def _get(server: str, path: str) -> dict:
    with _client(server) as client:
        resp = client.get(path)
        resp.raise_for_status()
        return resp.json()


def _remote_run(server: str, req: RunRequest) -> list[RunReport]:
    job = _post(server, "/runs", json.loads(req.model_dump_json()))
    job_id = job["job_id"]
    while True:
        status = _get(server, f"/runs/{job_id}")
        if status["status"] == "done":
            return [RunReport.from_json(json.dumps(r)) for r in status["reports"]]
        if status["status"] == "error":
            raise ConfigError(f"remote run failed: {status['error']}")
        time.sleep(0.5)


if __name__ == "__main__":
    main()
