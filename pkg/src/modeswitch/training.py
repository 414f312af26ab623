"""Cross-entropy-method search over policy parameters.

Each iteration samples a population of parameter vectors from a diagonal
Gaussian, scores every candidate on the same batch of initial states
(common random numbers keep the ranking stable), refits the Gaussian to the
elite set, and keeps a decaying extra-noise floor so the search does not
collapse early. Everything is driven by one seed, so a (seed, config) pair
always produces the same policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingDiverged
from .lander import EnvConfig, LanderEnv
from .policy import EvalStats, PolicyNet, evaluate_policy, run_episode


@dataclass(frozen=True)
class TrainConfig:
    hidden_width: int = 64
    activation: str = "mish"
    alpha: float = 0.01
    population: int = 48
    elite_count: int = 6
    iterations: int = 120
    episodes_per_candidate: int = 5
    max_episode_steps: int = 500
    init_sigma: float = 0.4
    noise_floor: float = 0.02
    extra_noise: float = 0.2
    extra_noise_decay: float = 0.95
    patience: int = 40
    min_improve: float = 1.0
    diverged_floor: float = 0.0


@dataclass
class TrainStats:
    best_mean: float
    history: list[float] = field(default_factory=list)
    iterations_run: int = 0
    stopped_early: bool = False


class CrossEntropyTrainer:
    """fit-style wrapper; the trained policy lands in `policy_`."""

    def __init__(self, config: TrainConfig | None = None, seed: int = 0):
        self.config = config or TrainConfig()
        self.seed = seed
        self.policy_: PolicyNet | None = None
        self.stats_: TrainStats | None = None

    def fit(self, env_config: EnvConfig | None = None) -> "CrossEntropyTrainer":
        self.policy_, self.stats_ = train_baseline(
            env_config or EnvConfig(), self.config, self.seed
        )
        return self

    def get_params(self, deep: bool = True) -> dict:
        return {"config": self.config, "seed": self.seed}


def _score(flat, cfg: TrainConfig, env: LanderEnv, inits) -> float:
    policy = PolicyNet.from_flat(
        flat, cfg.hidden_width, cfg.hidden_width, cfg.activation, cfg.alpha
    )
    total = 0.0
    for init in inits:
        ret, _, _ = run_episode(policy, env, init, max_steps=cfg.max_episode_steps)
        total += ret
    return total / len(inits)


def train_baseline(env_config: EnvConfig | None, config: TrainConfig | None,
                   seed: int = 0) -> tuple[PolicyNet, TrainStats]:
    """CEM search maximizing mean episodic return over sampled initial states."""
    cfg = config or TrainConfig()
    env_config = env_config or EnvConfig()
    env = LanderEnv(env_config)
    rng = np.random.default_rng(seed)

    template = PolicyNet.random(rng, cfg.hidden_width, cfg.hidden_width,
                                cfg.activation, cfg.alpha)
    mu = template.flat_parameters()
    sigma = np.full(mu.shape, cfg.init_sigma)

    stats = TrainStats(best_mean=-np.inf)
    best_flat = mu.copy()
    extra = cfg.extra_noise
    since_improve = 0

    for it in range(cfg.iterations):
        inits = [env_config.sampler.sample(rng)
                 for _ in range(cfg.episodes_per_candidate)]
        samples = rng.normal(size=(cfg.population, mu.size))
        candidates = mu + sigma * samples
        candidates[0] = best_flat  # elitism: best-so-far always competes
        scores = np.array([_score(c, cfg, env, inits) for c in candidates])

        order = np.argsort(-scores, kind="stable")
        elite = candidates[order[: cfg.elite_count]]
        mu = elite.mean(axis=0)
        sigma = np.sqrt(elite.var(axis=0) + extra**2) + cfg.noise_floor
        extra *= cfg.extra_noise_decay

        iter_best = float(scores[order[0]])
        stats.history.append(iter_best)
        stats.iterations_run = it + 1
        if iter_best > stats.best_mean + cfg.min_improve:
            stats.best_mean = iter_best
            best_flat = candidates[order[0]].copy()
            since_improve = 0
        else:
            if iter_best > stats.best_mean:
                stats.best_mean = iter_best
                best_flat = candidates[order[0]].copy()
            since_improve += 1
            if since_improve >= cfg.patience:
                stats.stopped_early = True
                break

    if stats.stopped_early and stats.best_mean < cfg.diverged_floor:
        raise TrainingDiverged(
            f"best mean return {stats.best_mean:.2f} never reached "
            f"{cfg.diverged_floor} within the patience window"
        )

    policy = PolicyNet.from_flat(
        best_flat, cfg.hidden_width, cfg.hidden_width, cfg.activation, cfg.alpha,
        meta={"trainer": "cem", "seed": seed, "iterations": stats.iterations_run,
              "train_mean_return": stats.best_mean},
    )
    return policy, stats


def training_report(policy: PolicyNet, env_config: EnvConfig | None,
                    n_episodes: int = 100, seed: int = 1000) -> EvalStats:
    """Post-training evaluation at full episode length."""
    return evaluate_policy(policy, env_config, n_episodes, seed)
