"""HTTP service exposing datasets, embeddings, and plan/experiment jobs.

Read endpoints serve the dataset directory; plan and experiment jobs run on
a background worker pool and their results are written to durable files
(write-then-rename) under <dataset>/jobs/<job id>/ before the job flips to
done, so concurrent readers never observe partial results.
"""

from __future__ import annotations

import json
import os
import queue
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import analysis
from .dataset import Dataset, load_dataset, read_embedding_table
from .errors import ModeSwitchError
from .pacmap import PacmapEmbedding
from .planner import PlanConfig, PlanProblem, plan

API_VERSION = 1


class PointRef(BaseModel):
    episode: str
    step: int


class PlanRequest(BaseModel):
    source: PointRef
    goal: PointRef | None = None
    goal_latent: list[float] | None = None
    horizon: int = 40
    seed: int = 0
    restarts: int = 8
    max_iters: int = 500
    tol: float = 1e-6


@dataclass
class Job:
    job_id: str
    kind: str                   # "plan" | "experiment"
    status: str = "queued"      # queued -> running -> done | failed
    progress: float = 0.0
    result: dict | None = None
    error: str | None = None
    result_location: str | None = None

    def handle(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "status": self.status,
            "progress": self.progress,
            "result": self.result,
            "error": self.error,
            "result_location": self.result_location,
        }


def _atomic_write_json(obj, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


class ServiceStore:
    """Dataset cache plus the guarded job table and worker pool."""

    def __init__(self, dataset_dir, workers: int = 1):
        self.dataset_dir = Path(dataset_dir)
        self.lock = threading.Lock()
        self.jobs: dict[str, Job] = {}
        self.queue: queue.Queue = queue.Queue()
        self.reloading = False
        self.dataset: Dataset | None = None
        self.embedding_rows: list[dict] | None = None
        self._counter = 0
        self.reload()
        for _ in range(max(1, workers)):
            threading.Thread(target=self._worker_loop, daemon=True).start()

    def reload(self) -> None:
        self.reloading = True
        try:
            self.dataset = load_dataset(self.dataset_dir)
            try:
                self.embedding_rows = read_embedding_table(self.dataset_dir)
            except FileNotFoundError:
                self.embedding_rows = None
        finally:
            self.reloading = False

    def guard_ready(self) -> None:
        if self.reloading:
            raise HTTPException(status_code=409, detail="dataset is reloading")

    def submit(self, kind: str, request: PlanRequest) -> Job:
        with self.lock:
            self._counter += 1
            job = Job(job_id=f"job-{self._counter:04d}", kind=kind)
            self.jobs[job.job_id] = job
        self.queue.put((job.job_id, request))
        return job

    def get_job(self, job_id: str) -> Job:
        with self.lock:
            if job_id not in self.jobs:
                raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
            return self.jobs[job_id]

    def _set(self, job_id: str, **updates) -> None:
        with self.lock:
            job = self.jobs[job_id]
            for key, value in updates.items():
                setattr(job, key, value)

    def _worker_loop(self) -> None:
        while True:
            job_id, request = self.queue.get()
            with self.lock:
                kind = self.jobs[job_id].kind
            self._set(job_id, status="running", progress=0.1)
            try:
                if kind == "plan":
                    self._run_plan(job_id, request)
                else:
                    self._run_experiment(job_id, request)
            except (ModeSwitchError, KeyError, ValueError, OSError) as exc:
                self._set(job_id, status="failed", error=f"{type(exc).__name__}: {exc}")
            finally:
                self.queue.task_done()

    def _resolve(self, request: PlanRequest):
        data = self.dataset
        if data.policy is None:
            raise ModeSwitchError("dataset carries no policy file")
        source = data.get(request.source.episode)
        if not 0 <= request.source.step < source.states.shape[0]:
            raise ValueError(f"source step {request.source.step} out of range")
        x0 = source.state_at(request.source.step)
        if request.goal_latent is not None:
            z_goal = np.asarray(request.goal_latent, dtype=float)
        elif request.goal is not None:
            goal = data.get(request.goal.episode)
            if not 0 <= request.goal.step < goal.states.shape[0]:
                raise ValueError(f"goal step {request.goal.step} out of range")
            z_goal = goal.latent_at(request.goal.step)
        else:
            raise ValueError("either goal or goal_latent is required")
        if z_goal.shape != (data.policy.hidden_width,):
            raise ValueError(
                f"DimensionMismatch: goal latent has {z_goal.shape[0]} "
                f"components, policy latent width is {data.policy.hidden_width}"
            )
        return data, x0, z_goal

    def _job_dir(self, job_id: str) -> Path:
        path = self.dataset_dir / "jobs" / job_id
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _projector(self) -> PacmapEmbedding | None:
        """Rebuild the point projector from the stored embedding table."""
        if self.embedding_rows is None:
            return None
        _, _, _, latents = self.dataset.latent_matrix()
        if latents.shape[0] != len(self.embedding_rows):
            return None  # embedding was fitted on a different episode subset
        model = PacmapEmbedding()
        model.training_data_ = latents
        model.embedding_ = np.array(
            [[row["y1"], row["y2"]] for row in self.embedding_rows])
        return model

    def _run_plan(self, job_id: str, request: PlanRequest) -> None:
        data, x0, z_goal = self._resolve(request)
        problem = PlanProblem(
            x0=x0, z_goal=z_goal, horizon=request.horizon, policy=data.policy,
            params=data.env_config.physics,
            obs_scales=data.env_config.obs_scales,
        )
        result = plan(problem, PlanConfig(
            max_iters=request.max_iters, tol=request.tol,
            restarts=request.restarts, seed=request.seed,
        ))
        doc = analysis._plan_to_dict(result)
        doc["version"] = API_VERSION
        self._set(job_id, progress=0.9)
        out = self._job_dir(job_id) / "plan.json"
        _atomic_write_json(doc, out)
        self._set(job_id, status="done", progress=1.0, result=doc,
                  result_location=str(out))

    def _run_experiment(self, job_id: str, request: PlanRequest) -> None:
        data, _, _ = self._resolve(request)
        if request.goal is None:
            raise ValueError("experiment jobs need an episode/step goal")
        spec = analysis.InterventionSpec(
            request.source.episode, request.source.step,
            request.goal.episode, request.goal.step, request.horizon,
        )
        report = analysis.switch_experiment(
            data.policy, data.env_config, data, spec,
            PlanConfig(max_iters=request.max_iters, tol=request.tol,
                       restarts=request.restarts, seed=request.seed),
        )
        self._set(job_id, progress=0.8)
        out_dir = self._job_dir(job_id) / "report"
        projector = self._projector()
        analysis.export_report(report, out_dir, embedding=projector)
        switched_overlay = None
        if projector is not None and report.switched is not None:
            switched_overlay = projector.transform(report.switched.latents).tolist()
        summary = {
            "version": API_VERSION,
            "spec": spec.to_dict(),
            "baseline_return": report.baseline_return,
            "baseline_outcome": report.baseline.outcome.value,
            "switched_return": report.switched_return,
            "switched_outcome": (None if report.switched is None
                                 else report.switched.outcome.value),
            "flip": report.flip,
            "plan_error": report.plan_error,
            "baseline_trace": report.baseline_trace.tolist(),
            "switched_trace": (None if report.switched_trace is None
                               else report.switched_trace.tolist()),
            "planned_actions": (None if report.plan_result is None
                                else report.plan_result.actions.tolist()),
            "baseline_actions": report.baseline.actions.tolist(),
            "switched_actions": (None if report.switched is None
                                 else report.switched.actions.tolist()),
            "baseline_states": report.baseline.states.tolist(),
            "switched_states": (None if report.switched is None
                                else report.switched.states.tolist()),
            "switched_overlay": switched_overlay,
        }
        _atomic_write_json(summary, self._job_dir(job_id) / "experiment.json")
        self._set(job_id, status="done", progress=1.0, result=summary,
                  result_location=str(out_dir))


def create_app(dataset_dir, workers: int = 1,
               cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="modeswitch service", version=str(API_VERSION))
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = ServiceStore(dataset_dir, workers=workers)
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def invalid_spec(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/embedding")
    def get_embedding():
        store.guard_ready()
        if store.embedding_rows is None:
            raise HTTPException(
                status_code=404,
                detail="no embedding table; run the embed command first",
            )
        return {"version": API_VERSION, "points": store.embedding_rows}

    @app.get("/episodes")
    def get_episodes():
        store.guard_ready()
        episodes = [
            {
                "episode_id": rec.episode_id,
                "seed": rec.seed,
                "outcome": rec.outcome.value,
                "cumulative_reward": rec.cumulative_reward,
                "n_steps": rec.n_steps,
                "event": rec.final_event.value,
            }
            for rec in store.dataset.records
        ]
        return {"version": API_VERSION, "episodes": episodes}

    @app.get("/episodes/{episode_id}")
    def get_episode(episode_id: str, include_latents: bool = False):
        store.guard_ready()
        try:
            rec = store.dataset.get(episode_id)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown episode {episode_id}")
        steps = []
        n_rows = rec.states.shape[0]
        for t in range(n_rows):
            terminal = t == n_rows - 1
            row = {
                "step": t,
                "state": rec.states[t].tolist(),
                "legs": rec.leg_flags[t].tolist(),
                "observation": rec.observations[t].tolist(),
                "action": None if terminal else rec.actions[t].tolist(),
                "reward": None if terminal else float(rec.rewards[t]),
                "event": rec.final_event.value if terminal else "none",
            }
            if include_latents:
                row["latent"] = rec.latents[t].tolist()
            steps.append(row)
        return {
            "version": API_VERSION,
            "episode_id": rec.episode_id,
            "outcome": rec.outcome.value,
            "cumulative_reward": rec.cumulative_reward,
            "steps": steps,
        }

    def _validate_refs(request: PlanRequest) -> None:
        data = store.dataset
        refs = [request.source] + ([request.goal] if request.goal else [])
        for ref in refs:
            try:
                data.get(ref.episode)
            except KeyError:
                raise HTTPException(status_code=404,
                                    detail=f"unknown episode {ref.episode}")
        if request.goal_latent is not None:
            width = data.policy.hidden_width if data.policy else 0
            if len(request.goal_latent) != width:
                raise HTTPException(
                    status_code=400,
                    detail=f"DimensionMismatch: goal latent has "
                           f"{len(request.goal_latent)} components, policy "
                           f"latent width is {width}",
                )
        if request.goal is None and request.goal_latent is None:
            raise HTTPException(status_code=400,
                                detail="either goal or goal_latent is required")
        if request.horizon < 0:
            raise HTTPException(status_code=400, detail="horizon must be >= 0")

    @app.post("/plan")
    def post_plan(request: PlanRequest):
        store.guard_ready()
        _validate_refs(request)
        return store.submit("plan", request).handle()

    @app.post("/experiment")
    def post_experiment(request: PlanRequest):
        store.guard_ready()
        if request.goal is None:
            raise HTTPException(status_code=400,
                                detail="experiment jobs need an episode/step goal")
        _validate_refs(request)
        return store.submit("experiment", request).handle()

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return store.get_job(job_id).handle()

    return app
