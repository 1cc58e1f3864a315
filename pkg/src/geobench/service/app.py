"""FastAPI service wrapping the benchmark core.

Cheap operations (classify, cost, small generates) answer synchronously;
runs and sweeps become background jobs polled via /runs/{id}.
"""

from __future__ import annotations

import itertools
import json
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from .. import __version__
from ..errors import ConfigError, GeobenchError
from ..metrics.report import RunReport, csv_text
from ..protocols import available
from .models import (
    ClassifyRequest,
    ClassifyResponse,
    CostRequest,
    CostResponse,
    GenerateRequest,
    GenerateResponse,
    Health,
    JobInfo,
    JobResult,
    ProtocolList,
    RunRequest,
)
from .ops import op_classify, op_cost, op_generate, op_run

_MAX_SYNC_GENERATE = 2_000_000


@dataclass
class _Job:
    job_id: str
    status: str = "queued"
    error: str | None = None
    reports: list[RunReport] = field(default_factory=list)


class JobStore:
    def __init__(self):
        self._jobs: dict[str, _Job] = {}
        self._lock = threading.Lock()

    def submit(self, req: RunRequest) -> str:
        job = _Job(job_id=uuid.uuid4().hex[:12])
        with self._lock:
            self._jobs[job.job_id] = job

        def work():
            job.status = "running"
            try:
                job.reports = op_run(req)
                job.status = "done"
            except GeobenchError as exc:
                job.status = "error"
                job.error = str(exc)
            except Exception as exc:  # keep the service alive on bugs
                job.status = "error"
                job.error = f"internal: {exc!r}"

        threading.Thread(target=work, daemon=True).start()
        return job.job_id

    def get(self, job_id: str) -> _Job:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no job {job_id}")
        return job

    def all(self) -> list[_Job]:
        with self._lock:
            return list(self._jobs.values())


def create_app() -> FastAPI:
    app = FastAPI(title="geobench", version=__version__)
    jobs = JobStore()
    app.state.jobs = jobs

    @app.exception_handler(ConfigError)
    async def config_error(request, exc: ConfigError):
        raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/healthz", response_model=Health)
    def healthz():
        return Health(status="ok", version=__version__)

    @app.get("/protocols", response_model=ProtocolList)
    def protocols():
        return ProtocolList(protocols=available())

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest):
        if req.count > _MAX_SYNC_GENERATE:
            raise HTTPException(
                status_code=422,
                detail=f"count above synchronous limit {_MAX_SYNC_GENERATE}",
            )
        try:
            return op_generate(req)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/classify", response_model=ClassifyResponse)
    def classify_txns(req: ClassifyRequest):
        try:
            return op_classify(req)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/cost", response_model=CostResponse)
    def cost(req: CostRequest):
        try:
            return op_cost(req)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/runs", response_model=JobInfo, status_code=202)
    def submit_run(req: RunRequest):
        # fail fast on invalid configs before accepting the job
        try:
            if req.scenario is not None:
                from ..scenarios.runner import point_configs

                point_configs(req.scenario)
            else:
                from ..scenarios.runner import build_run

                build_run(req.config)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        job_id = jobs.submit(req)
        return JobInfo(job_id=job_id, status="queued")

    @app.get("/runs", response_model=list[JobInfo])
    def list_runs():
        return [
            JobInfo(
                job_id=j.job_id,
                status=j.status,
                error=j.error,
                n_reports=len(j.reports),
            )
            for j in jobs.all()
        ]

    @app.get("/runs/{job_id}", response_model=JobResult)
    def get_run(job_id: str):
        job = jobs.get(job_id)
        return JobResult(
            job_id=job.job_id,
            status=job.status,
            error=job.error,
            n_reports=len(job.reports),
            reports=[json.loads(r.to_json()) for r in job.reports],
        )

    @app.get("/runs/{job_id}/csv", response_class=PlainTextResponse)
    def get_run_csv(job_id: str):
        job = jobs.get(job_id)
        if job.status != "done":
            raise HTTPException(status_code=409, detail=f"job is {job.status}")
        return csv_text(job.reports)

    return app


app = create_app()
