"""FastAPI service wrapping the simulator.

Quick computations (config validation, series statistics, short runs)
are synchronous endpoints; full experiments are submitted as jobs that
run on a worker thread and stream progress.  The CLI talks to these same
handlers, either in-process or over HTTP.
"""

import threading
import uuid
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import ExperimentConfig, config_overrides, desk_profile, format_config, parse_config
from .errors import BeamrlError, ConfigError
from .harness import records_to_csv, run_experiment, summarize
from .stats import distribution_stats, moving_average

SYNC_SLOT_LIMIT = 5000  # larger runs must go through the job queue


# Request / response models ------------------------------------------------


class ConfigRequest(BaseModel):
    profile: str = Field("paper", description="base profile: 'paper' or 'desk'")
    config_text: Optional[str] = Field(
        None, description="full key=value config text; overrides the profile"
    )
    overrides: dict[str, Any] = Field(default_factory=dict)


class ConfigResponse(BaseModel):
    config_text: str
    state_length: int
    num_actions: int
    rho: float


class RunRequest(ConfigRequest):
    slots: Optional[int] = Field(None, ge=1, description="cap on slots per run")
    include_records: bool = False
    record_stride: int = Field(1, ge=1)


class SlotRow(BaseModel):
    slot: int
    avg_rate: float
    eps: float
    lr: float


class RunSummary(BaseModel):
    policy: str
    seed: int
    slots: int
    mean_rate: float
    final_ma_rate: float
    singular_slots: int


class RunResponse(BaseModel):
    summaries: list[RunSummary]
    records: Optional[dict[str, list[SlotRow]]] = None


class JobStatus(BaseModel):
    job_id: str
    state: str  # queued | running | done | failed
    progress: float
    detail: str = ""
    summaries: Optional[list[RunSummary]] = None


class SeriesRequest(BaseModel):
    values: list[float]
    window: int = Field(500, ge=1)


class SeriesResponse(BaseModel):
    values: list[float]


class DistributionRequest(BaseModel):
    values: list[float]
    grid_points: int = Field(101, ge=2)


class DistributionResponse(BaseModel):
    grid: list[float]
    cdf: list[float]
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float


# Config assembly ----------------------------------------------------------


def build_config(req: ConfigRequest) -> ExperimentConfig:
    if req.config_text is not None:
        base = parse_config(req.config_text)
    elif req.profile == "desk":
        base = desk_profile()
    elif req.profile == "paper":
        base = ExperimentConfig()
    else:
        raise ConfigError(f"unknown profile {req.profile!r}")
    if req.overrides:
        base = config_overrides(base, req.overrides)
    return base


def _run(req: RunRequest, progress_cb=None):
    cfg = build_config(req)
    records = run_experiment(cfg, slots=req.slots, progress=progress_cb)
    return cfg, records


def _summaries(records, cfg):
    return [RunSummary(**s) for s in summarize(records, cfg.ma_window)]


# Job registry -------------------------------------------------------------


class Job:
    def __init__(self, request: RunRequest):
        self.id = uuid.uuid4().hex[:12]
        self.request = request
        self.state = "queued"
        self.progress = 0.0
        self.detail = ""
        self.summaries = None
        self.csv_text = None
        self._lock = threading.Lock()

    def status(self) -> JobStatus:
        with self._lock:
            return JobStatus(
                job_id=self.id,
                state=self.state,
                progress=self.progress,
                detail=self.detail,
                summaries=self.summaries,
            )


class JobRegistry:
    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(self, request: RunRequest) -> Job:
        job = Job(request)
        with self._lock:
            self._jobs[job.id] = job
        thread = threading.Thread(target=self._work, args=(job,), daemon=True)
        thread.start()
        return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise KeyError(job_id)
        return job

    def _work(self, job: Job):
        cfg = build_config(job.request)
        total_units = len(cfg.seeds) * len(cfg.policies)
        done_units = [0]

        def progress(policy, seed, done, total):
            with job._lock:
                job.progress = (done_units[0] + done / total) / total_units
                job.detail = f"{policy} seed={seed}: {done}/{total} slots"

        with job._lock:
            job.state = "running"
        try:
            records = run_experiment(cfg, slots=job.request.slots, progress=progress)
            # progress callbacks fire per policy run; count completed units
            done_units[0] = total_units
            with job._lock:
                job.summaries = _summaries(records, cfg)
                job.csv_text = records_to_csv(records, cfg.k, cfg.n_s)
                job.progress = 1.0
                job.state = "done"
                job.detail = "completed"
        except BeamrlError as exc:
            with job._lock:
                job.state = "failed"
                job.detail = str(exc)


def create_app() -> FastAPI:
    app = FastAPI(title="beamrl", version=__version__)
    jobs = JobRegistry()
    app.state.jobs = jobs

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/config/validate", response_model=ConfigResponse)
    def validate(req: ConfigRequest):
        try:
            cfg = build_config(req)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        from .channel import jakes_rho

        return ConfigResponse(
            config_text=format_config(cfg),
            state_length=cfg.state_length,
            num_actions=cfg.num_actions,
            rho=jakes_rho(cfg.doppler_hz, cfg.slot_s),
        )

    @app.post("/runs", response_model=RunResponse)
    def run_sync(req: RunRequest):
        try:
            cfg = build_config(req)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        slots = req.slots if req.slots is not None else cfg.total_slots
        if slots * len(cfg.seeds) * len(cfg.policies) > SYNC_SLOT_LIMIT:
            raise HTTPException(
                status_code=413,
                detail=f"synchronous runs are capped at {SYNC_SLOT_LIMIT} "
                "total slots; submit a job instead",
            )
        try:
            records = run_experiment(cfg, slots=req.slots)
        except BeamrlError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        response = RunResponse(summaries=_summaries(records, cfg))
        if req.include_records:
            response.records = {
                f"{rec.policy}/{rec.seed}": [
                    SlotRow(
                        slot=row.slot,
                        avg_rate=row.average_rate,
                        eps=row.eps if row.eps == row.eps else -1.0,
                        lr=row.lr if row.lr == row.lr else -1.0,
                    )
                    for row in rec.slots[:: req.record_stride]
                ]
                for rec in records
            }
        return response

    @app.post("/jobs", response_model=JobStatus, status_code=202)
    def submit_job(req: RunRequest):
        try:
            build_config(req)  # fail fast on bad configs
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        job = jobs.submit(req)
        return job.status()

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str):
        try:
            return jobs.get(job_id).status()
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no job {job_id}")

    @app.get("/jobs/{job_id}/csv")
    def job_csv(job_id: str):
        try:
            job = jobs.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no job {job_id}")
        with job._lock:
            if job.state != "done":
                raise HTTPException(
                    status_code=409, detail=f"job is {job.state}, not done"
                )
            text = job.csv_text
        from fastapi.responses import PlainTextResponse

        return PlainTextResponse(text, media_type="text/csv")

    @app.post("/stats/moving-average", response_model=SeriesResponse)
    def stats_moving_average(req: SeriesRequest):
        return SeriesResponse(
            values=list(moving_average(req.values, req.window))
        )

    @app.post("/stats/distribution", response_model=DistributionResponse)
    def stats_distribution(req: DistributionRequest):
        if not req.values:
            raise HTTPException(status_code=422, detail="values must be nonempty")
        d = distribution_stats(req.values, req.grid_points)
        return DistributionResponse(
            grid=list(d.grid),
            cdf=list(d.cdf),
            q1=d.q1,
            median=d.median,
            q3=d.q3,
            whisker_low=d.whisker_low,
            whisker_high=d.whisker_high,
        )

    return app


app = create_app()
