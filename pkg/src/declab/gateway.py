"""HTTP surface over the Platform orchestrator.

One FastAPI app per Platform instance; the data directory comes from the
``PLATFORM_DATA_DIR`` environment variable (in-memory when unset). Jobs
submitted over HTTP run in worker threads; poll ``GET /v1/jobs/{id}``.
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import errors
from .platform import Platform

_STATUS = {
    errors.UnknownUseCase: 404,
    errors.NoChampion: 409,
    errors.NoTuningRun: 404,
    errors.UnknownCandidate: 404,
    errors.CanaryRejected: 409,
    errors.DuplicateDecision: 409,
    errors.InsufficientData: 409,
}


def create_app(data_dir: Optional[str] = None,
               platform: Optional[Platform] = None,
               console_dir: Optional[str] = None) -> FastAPI:
    if platform is None:
        data_dir = data_dir or os.environ.get("PLATFORM_DATA_DIR")
        platform = Platform(data_dir)
    app = FastAPI(title="declab gateway")
    app.state.platform = platform

    @app.exception_handler(errors.PlatformError)
    async def _platform_error(request: Request, exc: errors.PlatformError):
        if isinstance(exc, errors.SpecValidationError):
            return JSONResponse(status_code=422, content={
                "error": "SpecValidationError", "problems": exc.problems})
        status = _STATUS.get(type(exc), 400)
        return JSONResponse(status_code=status, content={
            "error": type(exc).__name__, "detail": str(exc)})

    @app.post("/v1/usecases")
    async def onboard(doc: dict):
        return platform.onboard(doc)

    @app.get("/v1/usecases/{use_case}")
    async def describe(use_case: str):
        return platform.describe(use_case)

    @app.post("/v1/usecases/{use_case}/decide")
    async def decide(use_case: str, body: dict):
        return platform.decide(
            use_case, unit_id=body["unit_id"],
            raw_features=body.get("features", {}),
            seed=int(body.get("seed", 0)))

    @app.post("/v1/usecases/{use_case}/observe")
    async def observe(use_case: str, body: dict):
        return platform.observe(use_case, decision_id=body["decision_id"],
                                metric_values=body.get("metric_values", {}))

    @app.post("/v1/usecases/{use_case}/jobs")
    async def submit_job(use_case: str, body: dict):
        job = platform.submit_job(
            use_case, kind=body["kind"], params=body.get("params", {}),
            synchronous=bool(body.get("synchronous", False)))
        return _job_json(job)

    @app.get("/v1/jobs/{job_id}")
    async def get_job(job_id: str):
        try:
            return _job_json(platform.job(job_id))
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown job")

    @app.get("/v1/usecases/{use_case}/candidates")
    async def candidates(use_case: str):
        return {"candidates": platform.list_candidates(use_case)}

    @app.post("/v1/usecases/{use_case}/deploy")
    async def deploy(use_case: str, body: dict):
        return platform.deploy(
            use_case, candidate_id=body["candidate_id"],
            override=bool(body.get("override", False)),
            reason=body.get("reason", ""))

    @app.get("/v1/usecases/{use_case}/health")
    async def health(use_case: str):
        return platform.health(use_case)

    console = console_dir or os.environ.get("PLATFORM_CONSOLE_DIR")
    if console and Path(console).is_dir():
        app.mount("/console", StaticFiles(directory=console, html=True),
                  name="console")
    return app


def _job_json(job) -> dict:
    return {"id": job.id, "use_case": job.use_case, "kind": job.kind,
            "status": job.status, "result": job.result, "error": job.error,
            "created_at": job.created_at, "started_at": job.started_at,
            "finished_at": job.finished_at}
