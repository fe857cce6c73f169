"""FastAPI service wrapping the simulation harness.

Detection sweeps can take minutes, so they run as background jobs: POST
/experiments returns a job id, GET /experiments/{id} reports status and
records, GET /experiments/{id}/csv serves the CSV artifact.  Rate and
estimation sweeps are quick enough to answer synchronously.
"""

from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from . import __version__
from .core import ConfigError
from .harness import (
    detection_csv,
    estimation_csv,
    estimation_sweep,
    parse_config,
    rate_curves,
    rates_csv,
    run_experiment,
)
from .schemas import (
    EstimateResponse,
    EstimateRow,
    HealthResponse,
    JobStatus,
    MetricRow,
    RateRow,
    RatesResponse,
    RunRequest,
    SelftestCheck,
    SelftestResponse,
)
from .selfcheck import selftest

app = FastAPI(title="otfs-sim", version=__version__)

_jobs: dict = {}
_jobs_lock = threading.Lock()


def _records_to_rows(cfg, records) -> list[MetricRow]:
    return [
        MetricRow(
            snr_db=r.snr_db, ber=r.ber, ber_ci=r.ber_ci, fer=r.fer, fer_ci=r.fer_ci,
            trials=r.trials, nmse=r.nmse_mean, ber_iter1=r.ber_iter1, capped=r.capped,
        )
        for r in records
    ]


def _run_job(job_id: str, cfg, workers: int) -> None:
    try:
        records = run_experiment(cfg, workers=workers)
        with _jobs_lock:
            job = _jobs[job_id]
            job["state"] = "done"
            job["records"] = _records_to_rows(cfg, records)
            job["csv"] = detection_csv(cfg, records)
    except Exception as exc:
        with _jobs_lock:
            _jobs[job_id]["state"] = "failed"
            _jobs[job_id]["error"] = str(exc)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/experiments", response_model=JobStatus)
def submit_experiment(req: RunRequest) -> JobStatus:
    try:
        cfg = parse_config(req.config, "run")
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    job_id = uuid.uuid4().hex[:12]
    with _jobs_lock:
        _jobs[job_id] = {"state": "running", "kind": "run", "records": None,
                         "csv": None, "error": None}
    worker = threading.Thread(target=_run_job, args=(job_id, cfg, req.workers), daemon=True)
    worker.start()
    return JobStatus(job_id=job_id, state="running", kind="run")


@app.get("/experiments/{job_id}", response_model=JobStatus)
def experiment_status(job_id: str) -> JobStatus:
    with _jobs_lock:
        job = _jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job id")
        return JobStatus(job_id=job_id, state=job["state"], kind=job["kind"],
                         error=job["error"], records=job["records"])


@app.get("/experiments/{job_id}/csv", response_class=PlainTextResponse)
def experiment_csv(job_id: str) -> str:
    with _jobs_lock:
        job = _jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job id")
        if job["state"] != "done":
            raise HTTPException(status_code=409, detail=f"job is {job['state']}")
        return job["csv"]


@app.post("/rates", response_model=RatesResponse)
def rates(req: RunRequest) -> RatesResponse:
    try:
        cfg = parse_config(req.config, "rates")
        rows, _ = rate_curves(cfg)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return RatesResponse(
        rows=[RateRow(snr_db=r[0], rate_otfs=r[1], rate_ofdm_nocp=r[2],
                      rate_ofdm_cp=r[3], rate_ofdm_cp_mn=r[4]) for r in rows],
        csv=rates_csv(rows),
    )


@app.post("/estimate", response_model=EstimateResponse)
def estimate(req: RunRequest) -> EstimateResponse:
    try:
        cfg = parse_config(req.config, "estimate")
        rows = estimation_sweep(cfg, workers=req.workers)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return EstimateResponse(
        rows=[EstimateRow(snr_db=r[0], nmse=r[1], nmse_std=r[2], trials=r[3]) for r in rows],
        csv=estimation_csv(rows),
    )


@app.post("/selftest", response_model=SelftestResponse)
def run_selftest() -> SelftestResponse:
    results = selftest()
    return SelftestResponse(
        passed=all(ok for _, ok, _ in results),
        checks=[SelftestCheck(name=n, passed=ok, detail=d) for n, ok, d in results],
    )
