"""HTTP service exposing the analyses; the CLI can talk to it with --server."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .runner import EXIT_BALANCE, EXIT_INPUT, EXIT_NUMERICAL, run_config
from .schemas import AnalysisKind, AnalysisReport, ExperimentConfig, RunResponse
from .examples import example_configs

STATUS = {0: 200, EXIT_INPUT: 422, EXIT_NUMERICAL: 500, EXIT_BALANCE: 409}


class RunRequest(BaseModel):
    config: ExperimentConfig
    only: AnalysisKind | None = None


app = FastAPI(title="isolab", version="0.1.0")


def _respond(resp: RunResponse) -> JSONResponse:
    return JSONResponse(resp.model_dump(mode="json"), status_code=STATUS.get(resp.exit_code, 500))


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/schema")
def schema() -> dict:
    return {"config": ExperimentConfig.model_json_schema(), "report": AnalysisReport.model_json_schema()}


@app.get("/examples")
def examples() -> dict:
    return {name: cfg.model_dump(mode="json") for name, cfg in example_configs().items()}


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest) -> JSONResponse:
    return _respond(run_config(req.config, req.only))


def _single(kind: str):
    def endpoint(cfg: ExperimentConfig) -> JSONResponse:
        return _respond(run_config(cfg, kind))
    return endpoint


for _path, _kind in (("/check-isoperimetry", "isoperimetry"), ("/surface-verify", "isoperimetry"),
                     ("/exit-time", "exit-time"), ("/capacity", "capacity"), ("/parabolicity", "parabolicity"),
                     ("/balance", "balance"), ("/volume", "volume")):
    app.post(_path, response_model=RunResponse)(_single(_kind))
