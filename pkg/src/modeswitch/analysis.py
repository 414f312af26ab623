"""Rollout collection, latent matching, and mode-switch experiments.

The experiment flow: collect labeled episodes, pick an intervention state
from one episode and a goal latent from another with the opposite outcome,
plan a control sequence driving the terminal latent toward the goal, apply
it from the intervention state, hand control back to the policy, and compare
the two runs (latent-distance traces, cumulative rewards, outcome flip).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    Dataset, EpisodeRecord, Outcome, dump_json, label_outcome, read_json,
    read_episode_csv, write_episode_csv,
)
from .errors import DimensionMismatch, IoFailure, ModeSwitchError, NoCandidates
from .lander import Action, EnvConfig, LanderEnv, LanderState, TerminalEvent, observe
from .pacmap import PacmapEmbedding
from .planner import PlanConfig, PlanProblem, PlanResult, PlanStatus, plan
from .policy import PolicyNet, episode_seeds

REPORT_VERSION = 1


# --- rollout collection -------------------------------------------------------

def _run_and_record(policy: PolicyNet, env: LanderEnv, init: LanderState,
                    episode_id: str, seed: int | None,
                    planned_controls: np.ndarray | None = None) -> EpisodeRecord:
    """Roll one episode; the first len(planned_controls) steps are driven
    directly by effective throttles, the rest by the policy."""
    cfg = env.config
    state = env.reset(init)
    states, legs, observations, latents, actions, rewards = [], [], [], [], [], []
    event = TerminalEvent.NONE
    planned = np.empty((0, 2)) if planned_controls is None else planned_controls
    t = 0
    while not event.terminal:
        obs = observe(state, cfg.obs_scales)
        action_vec, latent_vec = policy.forward_full(obs)
        states.append(state.as_vector())
        legs.append([state.leg1, state.leg2])
        observations.append(obs)
        latents.append(latent_vec)
        if t < len(planned):
            m, s = float(planned[t, 0]), float(planned[t, 1])
            actions.append([2.0 * m - 1.0, s])
            state, r, event = env.step(Action(2.0 * m - 1.0, s), effective=(m, s))
        else:
            action = Action(float(action_vec[0]), float(action_vec[1]))
            actions.append([action.main, action.side])
            state, r, event = env.step(action)
        rewards.append(r)
        t += 1
    # trailing row: the terminal state with its observation/latent
    obs = observe(state, cfg.obs_scales)
    _, latent_vec = policy.forward_full(obs)
    states.append(state.as_vector())
    legs.append([state.leg1, state.leg2])
    observations.append(obs)
    latents.append(latent_vec)

    rewards_arr = np.array(rewards)
    cumulative = float(np.sum(rewards_arr))
    return EpisodeRecord(
        episode_id=episode_id,
        seed=seed,
        states=np.array(states),
        leg_flags=np.array(legs, dtype=int),
        observations=np.array(observations),
        latents=np.array(latents),
        actions=np.array(actions),
        rewards=rewards_arr,
        final_event=event,
        cumulative_reward=cumulative,
        outcome=label_outcome(cumulative, event),
    )


def collect_rollouts(policy: PolicyNet, env_config: EnvConfig | None,
                     n: int, seed: int = 0) -> list[EpisodeRecord]:
    """n labeled episodes from sampled initial states, deterministic in seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    cfg = env_config or EnvConfig()
    env = LanderEnv(cfg)
    records = []
    for i, ep_seed in enumerate(episode_seeds(seed, n)):
        rng = np.random.default_rng(ep_seed)
        init = cfg.sampler.sample(rng)
        records.append(_run_and_record(policy, env, init, f"{i:06d}", ep_seed))
    return records


def label_outcomes(records: list[EpisodeRecord]) -> list[EpisodeRecord]:
    """Recompute every record's outcome label (idempotent)."""
    for rec in records:
        rec.outcome = label_outcome(rec.cumulative_reward, rec.final_event)
    return records


# --- latent matching ----------------------------------------------------------

@dataclass(frozen=True)
class MatchCandidate:
    episode_id: str
    step: int
    distance: float


def nearest_cross_episode(dataset: Dataset, episode_id: str, step: int,
                          outcome_filter: Outcome, k: int = 10
                          ) -> list[MatchCandidate]:
    """k nearest latent points among steps of episodes with a given outcome.

    Distances are full-dimensional Euclidean; the 2D embedding is for human
    selection only.
    """
    query = dataset.get(episode_id).latent_at(step)
    pool = [rec for rec in dataset.records
            if rec.outcome is outcome_filter and rec.episode_id != str(episode_id)]
    if not pool:
        raise NoCandidates(f"no episodes with outcome {outcome_filter.value}")
    rows = []
    for rec in pool:
        if rec.latent_dim != query.shape[0]:
            raise DimensionMismatch(
                f"episode {rec.episode_id} latents have width {rec.latent_dim}, "
                f"query has {query.shape[0]}"
            )
        d = np.sqrt(np.sum((rec.latents - query) ** 2, axis=1))
        for t in range(len(d)):
            rows.append(MatchCandidate(rec.episode_id, t, float(d[t])))
    rows.sort(key=lambda c: (c.distance, c.episode_id, c.step))
    return rows[:k]


def objective_trace(record: EpisodeRecord, z_goal: np.ndarray) -> np.ndarray:
    """Per-step latent distance to the goal (unsquared, for plotting)."""
    z_goal = np.asarray(z_goal, dtype=float)
    if record.latent_dim != z_goal.shape[0]:
        raise DimensionMismatch(
            f"goal latent has width {z_goal.shape[0]}, episode has "
            f"{record.latent_dim}"
        )
    return np.sqrt(np.sum((record.latents - z_goal) ** 2, axis=1))


# --- the switch experiment ------------------------------------------------------

@dataclass
class InterventionSpec:
    source_episode: str
    source_step: int
    goal_episode: str
    goal_step: int
    horizon: int = 40

    def resolve(self, dataset: Dataset) -> tuple[LanderState, np.ndarray]:
        source = dataset.get(self.source_episode)
        goal = dataset.get(self.goal_episode)
        if not 0 <= self.source_step < source.states.shape[0]:
            raise KeyError(f"source step {self.source_step} out of range")
        if not 0 <= self.goal_step < goal.states.shape[0]:
            raise KeyError(f"goal step {self.goal_step} out of range")
        return source.state_at(self.source_step), goal.latent_at(self.goal_step)

    def to_dict(self) -> dict:
        return {
            "source_episode": self.source_episode,
            "source_step": self.source_step,
            "goal_episode": self.goal_episode,
            "goal_step": self.goal_step,
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InterventionSpec":
        return cls(
            str(d["source_episode"]), int(d["source_step"]),
            str(d["goal_episode"]), int(d["goal_step"]), int(d["horizon"]),
        )


def _dominant_action_period(actions: np.ndarray, max_lag: int = 60) -> int | None:
    """Autocorrelation peak of the action sequence; cycling diagnostics only."""
    if len(actions) < 8:
        return None
    sig = actions - actions.mean(axis=0)
    denom = float(np.sum(sig * sig))
    if denom <= 1e-12:
        return None
    best_lag, best_val = None, 0.25
    for lag in range(2, min(max_lag, len(actions) // 2)):
        val = float(np.sum(sig[:-lag] * sig[lag:])) / denom
        if val > best_val:
            best_lag, best_val = lag, val
    return best_lag


@dataclass
class ExperimentReport:
    spec: InterventionSpec
    z_goal: np.ndarray
    baseline: EpisodeRecord
    switched: EpisodeRecord | None
    plan_result: PlanResult | None
    plan_error: str | None
    baseline_trace: np.ndarray
    switched_trace: np.ndarray | None
    flip: bool

    @property
    def baseline_return(self) -> float:
        return self.baseline.cumulative_reward

    @property
    def switched_return(self) -> float | None:
        return None if self.switched is None else self.switched.cumulative_reward

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        def arr_eq(a, b):
            if (a is None) != (b is None):
                return False
            return a is None or np.array_equal(a, b)
        plan_eq = (self.plan_result is None) == (other.plan_result is None)
        if plan_eq and self.plan_result is not None:
            p, q = self.plan_result, other.plan_result
            plan_eq = (
                np.array_equal(p.controls, q.controls)
                and np.array_equal(p.predicted_states, q.predicted_states)
                and p.objective_trace == q.objective_trace
                and p.terminal_objective == q.terminal_objective
                and p.status == q.status
                and p.restarts_used == q.restarts_used
                and p.feasible == q.feasible
            )
        return (
            self.spec == other.spec
            and arr_eq(self.z_goal, other.z_goal)
            and self.baseline == other.baseline
            and self.switched == other.switched
            and plan_eq
            and self.plan_error == other.plan_error
            and arr_eq(self.baseline_trace, other.baseline_trace)
            and arr_eq(self.switched_trace, other.switched_trace)
            and self.flip == other.flip
        )


def _is_solved(value: float) -> bool:
    return value >= 200.0


def switch_experiment(policy: PolicyNet, env_config: EnvConfig | None,
                      dataset: Dataset, spec: InterventionSpec,
                      plan_config: PlanConfig | None = None) -> ExperimentReport:
    """Baseline vs planned-intervention run from the same intervention state.

    Both runs start at the source state. The baseline hands the policy the
    whole episode; the switched run applies the planned throttles for the
    horizon, then hands control back. If planning fails, the report still
    carries the baseline.
    """
    cfg = env_config or dataset.env_config or EnvConfig()
    x0, z_goal = spec.resolve(dataset)
    env = LanderEnv(cfg)

    baseline = _run_and_record(policy, env, x0, "baseline", None)
    baseline_trace = objective_trace(baseline, z_goal)

    plan_result: PlanResult | None = None
    plan_error: str | None = None
    if spec.horizon > 0:
        problem = PlanProblem(
            x0=x0, z_goal=z_goal, horizon=spec.horizon, policy=policy,
            params=cfg.physics, obs_scales=cfg.obs_scales,
        )
        try:
            plan_result = plan(problem, plan_config)
        except ModeSwitchError as exc:
            plan_error = f"{type(exc).__name__}: {exc}"

    switched = None
    switched_trace = None
    flip = False
    if plan_error is None:
        controls = (plan_result.controls if plan_result is not None
                    else np.empty((0, 2)))
        switched = _run_and_record(policy, env, x0, "switched", None,
                                   planned_controls=controls)
        switched_trace = objective_trace(switched, z_goal)
        flip = (
            _is_solved(baseline.cumulative_reward)
            != _is_solved(switched.cumulative_reward)
        ) or (
            np.sign(baseline.cumulative_reward)
            != np.sign(switched.cumulative_reward)
        )

    return ExperimentReport(
        spec=spec, z_goal=z_goal, baseline=baseline, switched=switched,
        plan_result=plan_result, plan_error=plan_error,
        baseline_trace=baseline_trace, switched_trace=switched_trace,
        flip=bool(flip),
    )


# --- report export / import ---------------------------------------------------

def _plan_to_dict(p: PlanResult) -> dict:
    return {
        "controls": p.controls.tolist(),
        "actions": p.actions.tolist(),
        "predicted_states": p.predicted_states.tolist(),
        "objective_trace": list(p.objective_trace),
        "terminal_objective": p.terminal_objective,
        "status": p.status.value,
        "restarts_used": p.restarts_used,
        "projected_gradient_norm": p.projected_gradient_norm,
        "feasible": p.feasible,
    }


def _plan_from_dict(d: dict) -> PlanResult:
    return PlanResult(
        controls=np.array(d["controls"]).reshape(-1, 2),
        actions=np.array(d["actions"]).reshape(-1, 2),
        predicted_states=np.array(d["predicted_states"]),
        objective_trace=list(d["objective_trace"]),
        terminal_objective=d["terminal_objective"],
        status=PlanStatus(d["status"]),
        restarts_used=d["restarts_used"],
        projected_gradient_norm=d["projected_gradient_norm"],
        feasible=d["feasible"],
    )


def export_report(report: ExperimentReport, out_dir,
                  embedding: PacmapEmbedding | None = None) -> Path:
    """Write the report directory: summary, step tables, traces, overlay."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary = {
            "version": REPORT_VERSION,
            "spec": report.spec.to_dict(),
            "z_goal": report.z_goal.tolist(),
            "baseline": {
                "return": report.baseline.cumulative_reward,
                "outcome": report.baseline.outcome.value,
                "event": report.baseline.final_event.value,
                "n_steps": report.baseline.n_steps,
                "action_period": _dominant_action_period(report.baseline.actions),
            },
            "switched": None,
            "plan": None if report.plan_result is None
                    else _plan_to_dict(report.plan_result),
            "plan_error": report.plan_error,
            "flip": report.flip,
        }
        if report.switched is not None:
            summary["switched"] = {
                "return": report.switched.cumulative_reward,
                "outcome": report.switched.outcome.value,
                "event": report.switched.final_event.value,
                "n_steps": report.switched.n_steps,
                "action_period": _dominant_action_period(report.switched.actions),
            }
        dump_json(summary, out / "summary.json")

        write_episode_csv(report.baseline, out / "baseline_steps.csv")
        if report.switched is not None:
            write_episode_csv(report.switched, out / "switched_steps.csv")

        if report.plan_result is not None:
            with open(out / "planned_actions.csv", "w", encoding="utf-8") as fh:
                fh.write("step,main_throttle,side_throttle,action_main,action_side\n")
                for t in range(len(report.plan_result.controls)):
                    m, s = report.plan_result.controls[t]
                    um, us = report.plan_result.actions[t]
                    fh.write(f"{t},{m!r},{s!r},{um!r},{us!r}\n")

        with open(out / "objective_trace.csv", "w", encoding="utf-8") as fh:
            fh.write("run,step,distance\n")
            for t, d in enumerate(report.baseline_trace):
                fh.write(f"baseline,{t},{float(d)!r}\n")
            if report.switched_trace is not None:
                for t, d in enumerate(report.switched_trace):
                    fh.write(f"switched,{t},{float(d)!r}\n")

        if embedding is not None and report.switched is not None:
            coords = embedding.transform(report.switched.latents)
            with open(out / "embedding_overlay.csv", "w", encoding="utf-8") as fh:
                fh.write("step,y1,y2\n")
                for t, (y1, y2) in enumerate(coords):
                    fh.write(f"{t},{float(y1)!r},{float(y2)!r}\n")
    except OSError as exc:
        raise IoFailure(f"failed to write report to {out}: {exc}") from exc
    return out


def load_report(report_dir) -> ExperimentReport:
    out = Path(report_dir)
    try:
        summary = read_json(out / "summary.json")
    except OSError as exc:
        raise IoFailure(f"failed to read report from {out}: {exc}") from exc
    if summary.get("version") != REPORT_VERSION:
        raise IoFailure(f"unsupported report version {summary.get('version')!r}")
    spec = InterventionSpec.from_dict(summary["spec"])
    z_goal = np.array(summary["z_goal"])

    base_info = summary["baseline"]
    baseline = read_episode_csv(
        out / "baseline_steps.csv", "baseline", None,
        base_info["return"], Outcome(base_info["outcome"]),
    )
    switched = None
    switched_trace = None
    if summary["switched"] is not None:
        sw = summary["switched"]
        switched = read_episode_csv(
            out / "switched_steps.csv", "switched", None,
            sw["return"], Outcome(sw["outcome"]),
        )
        switched_trace = objective_trace(switched, z_goal)
    plan_result = (None if summary["plan"] is None
                   else _plan_from_dict(summary["plan"]))
    return ExperimentReport(
        spec=spec, z_goal=z_goal, baseline=baseline, switched=switched,
        plan_result=plan_result, plan_error=summary["plan_error"],
        baseline_trace=objective_trace(baseline, z_goal),
        switched_trace=switched_trace, flip=bool(summary["flip"]),
    )
