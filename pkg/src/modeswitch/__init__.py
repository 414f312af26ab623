"""Behavioral-mode analysis and latent-space mode switching toolkit.

A small control policy's second hidden layer defines a latent space; this
package collects labeled rollouts of a planar lander, embeds the latents in
2D for inspection, and plans bounded engine commands that steer the terminal
latent point toward a goal taken from an episode with a different outcome.
"""

from .analysis import (
    ExperimentReport, InterventionSpec, collect_rollouts, export_report,
    label_outcomes, load_report, nearest_cross_episode, objective_trace,
    switch_experiment,
)
from .dataset import Dataset, EpisodeRecord, Outcome, load_dataset, write_dataset
from .lander import (
    Action, EnvConfig, InitialStateSampler, LanderEnv, LanderState,
    ObservationScales, PhysicsParams, RewardConfig, TerminalEvent, WorldConfig,
    dynamics, dynamics_jacobians, gate_action, load_env_config, observe,
    reward, save_env_config, step,
)
from .pacmap import (
    PacmapEmbedding, PairSets, PhaseWeights, build_pairs, loss_gradient,
    pacmap_loss, scaled_distance, weight_schedule,
)
from .planner import (
    ControlBounds, GradientCheckReport, PlanConfig, PlanProblem, PlanResult,
    PlanStatus, StateBounds, gradient_check, objective, objective_gradient,
    plan, rollout_model,
)
from .policy import (
    EvalStats, PolicyNet, evaluate_policy, leaky_relu, leaky_relu_prime,
    load_policy, mish, mish_prime, save_policy,
)
from .training import CrossEntropyTrainer, TrainConfig, TrainStats, train_baseline

__version__ = "0.1.0"

__all__ = [
    "Action", "ControlBounds", "CrossEntropyTrainer", "Dataset",
    "EnvConfig", "EpisodeRecord", "EvalStats", "ExperimentReport",
    "GradientCheckReport", "InitialStateSampler", "InterventionSpec",
    "LanderEnv", "LanderState", "ObservationScales", "Outcome",
    "PacmapEmbedding", "PairSets", "PhaseWeights", "PhysicsParams",
    "PlanConfig", "PlanProblem", "PlanResult", "PlanStatus", "PolicyNet",
    "RewardConfig", "StateBounds", "TerminalEvent", "TrainConfig",
    "TrainStats", "WorldConfig", "build_pairs", "collect_rollouts",
    "dynamics", "dynamics_jacobians", "evaluate_policy", "export_report",
    "gate_action", "gradient_check", "label_outcomes", "leaky_relu",
    "leaky_relu_prime", "load_dataset", "load_env_config", "load_policy",
    "load_report", "loss_gradient", "mish", "mish_prime",
    "nearest_cross_episode", "objective", "objective_gradient",
    "objective_trace", "observe", "pacmap_loss", "plan", "reward",
    "rollout_model", "save_env_config", "save_policy", "scaled_distance",
    "step", "switch_experiment", "train_baseline", "weight_schedule",
    "write_dataset",
]
