"""Action-sequence planning toward a goal latent point.

Single shooting: the decision variables are the effective engine throttles
for T steps (main in [0,1], side in [-1,1]); states follow from the airborne
dynamics, and the objective is the squared distance between the terminal
state's latent projection and the goal latent point. Gradients come from a
reverse adjoint sweep through the per-step Jacobians, and a multi-start
projected quasi-Newton solver handles the box constraints.

Planning over effective throttles (raw main command recovered as 2m-1)
keeps the engine-gate kink out of the search space entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AllRestartsFailed, NonFiniteState
from .lander import (
    LanderState, ObservationScales, PhysicsParams, advance, observe,
    step_jacobians,
)
from .policy import PolicyNet
from .solver import minimize_box_lbfgs


class PlanStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    STALLED = "stalled"


@dataclass(frozen=True)
class ControlBounds:
    main: tuple[float, float] = (0.0, 1.0)
    side: tuple[float, float] = (-1.0, 1.0)

    def arrays(self, horizon: int) -> tuple[np.ndarray, np.ndarray]:
        lower = np.tile([self.main[0], self.side[0]], horizon)
        upper = np.tile([self.main[1], self.side[1]], horizon)
        return lower, upper


@dataclass(frozen=True)
class StateBounds:
    """Rollout validity region (checked per restart, not hard constraints)."""

    half_width: float = 1.5
    floor: float = 0.02

    def valid(self, states: np.ndarray) -> bool:
        return bool(
            np.all(np.abs(states[:, 0]) <= self.half_width)
            and np.all(states[:, 1] >= self.floor)
        )


@dataclass
class PlanProblem:
    x0: LanderState
    z_goal: np.ndarray
    horizon: int
    policy: PolicyNet
    params: PhysicsParams = field(default_factory=PhysicsParams)
    obs_scales: ObservationScales = field(default_factory=ObservationScales)
    bounds: ControlBounds = field(default_factory=ControlBounds)
    state_bounds: StateBounds = field(default_factory=StateBounds)

    def __post_init__(self):
        self.z_goal = np.asarray(self.z_goal, dtype=float)
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if self.z_goal.shape != (self.policy.hidden_width,):
            raise ValueError(
                f"goal latent has dimension {self.z_goal.shape}, policy "
                f"latent width is {self.policy.hidden_width}"
            )
        if not np.all(np.isfinite(self.x0.as_vector())):
            raise ValueError("x0 must be finite")


@dataclass
class PlanResult:
    controls: np.ndarray          # (T, 2) effective throttles
    actions: np.ndarray           # (T, 2) raw commands (main = 2m - 1)
    predicted_states: np.ndarray  # (T+1, 6)
    objective_trace: list[float]
    terminal_objective: float
    status: PlanStatus
    restarts_used: int
    projected_gradient_norm: float
    feasible: bool = True


@dataclass(frozen=True)
class PlanConfig:
    max_iters: int = 500
    tol: float = 1e-6
    restarts: int = 8
    seed: int = 0


def rollout_model(x0, controls, params: PhysicsParams) -> np.ndarray:
    """Forward integration of the airborne model (no contact, no rewards)."""
    x0_vec = x0.as_vector() if isinstance(x0, LanderState) else np.asarray(x0, float)
    controls = np.asarray(controls, dtype=float).reshape(-1, 2)
    states = np.empty((len(controls) + 1, 6))
    states[0] = x0_vec
    try:
        for t, (m, s) in enumerate(controls):
            states[t + 1] = advance(states[t], float(m), float(s), params)
    except (ValueError, OverflowError) as exc:  # math.sin chokes on inf
        raise NonFiniteState(
            f"model rollout left the finite-state region at step {t}"
        ) from exc
    if not np.all(np.isfinite(states)):
        raise NonFiniteState("model rollout left the finite-state region")
    return states


def _terminal_latent(states, problem: PlanProblem) -> tuple[np.ndarray, np.ndarray]:
    terminal = LanderState.from_vector(states[-1])  # in-flight: legs stay 0
    obs = observe(terminal, problem.obs_scales)
    return problem.policy.latent(obs), obs


def objective(controls, problem: PlanProblem) -> float:
    """Squared distance between the terminal latent and the goal latent."""
    states = rollout_model(problem.x0, controls, problem.params)
    z, _ = _terminal_latent(states, problem)
    residual = problem.z_goal - z
    return float(residual @ residual)


def _obs_state_jacobian(scales: ObservationScales) -> np.ndarray:
    jac = np.zeros((8, 6))
    jac[0, 0] = scales.position
    jac[1, 1] = scales.position
    jac[2, 2] = scales.velocity
    jac[3, 3] = scales.velocity
    jac[4, 4] = 1.0
    jac[5, 5] = scales.angular
    return jac


def objective_and_gradient(controls, problem: PlanProblem
                           ) -> tuple[float, np.ndarray, np.ndarray]:
    """(objective, gradient (T,2), predicted states) via an adjoint sweep."""
    controls = np.asarray(controls, dtype=float).reshape(-1, 2)
    states = rollout_model(problem.x0, controls, problem.params)
    z, obs = _terminal_latent(states, problem)
    residual = problem.z_goal - z
    value = float(residual @ residual)

    latent_jac = problem.policy.latent_jacobian(obs)          # (h, 8)
    obs_jac = _obs_state_jacobian(problem.obs_scales)         # (8, 6)
    lam = obs_jac.T @ (latent_jac.T @ (-2.0 * residual))      # dJ/dx_T

    grad = np.empty_like(controls)
    for t in range(len(controls) - 1, -1, -1):
        a_d, b_d = step_jacobians(
            states[t], float(controls[t, 0]), float(controls[t, 1]),
            problem.params,
        )
        grad[t] = b_d.T @ lam
        lam = a_d.T @ lam
    return value, grad, states


def objective_gradient(controls, problem: PlanProblem) -> np.ndarray:
    return objective_and_gradient(controls, problem)[1]


def _start_points(problem: PlanProblem, config: PlanConfig) -> list[np.ndarray]:
    t = problem.horizon
    rng = np.random.default_rng(config.seed)
    hover = min(1.0, max(
        0.0, problem.params.gravity * problem.params.mass / problem.params.main_thrust
    ))
    starts = [np.zeros((t, 2)), np.column_stack([np.full(t, hover), np.zeros(t)])]
    lower, upper = problem.bounds.arrays(t)
    lo = lower.reshape(t, 2)
    hi = upper.reshape(t, 2)
    while len(starts) < config.restarts:
        starts.append(rng.uniform(lo, hi))
    return starts[: config.restarts]


def plan(problem: PlanProblem, config: PlanConfig | None = None) -> PlanResult:
    """Multi-start projected quasi-Newton descent; best local minimum wins.

    Ties on the terminal objective break toward the lower-energy action
    sequence. Restarts whose final trajectory leaves the validity region are
    kept only if no restart stays inside it (feasible=False in that case).
    """
    config = config or PlanConfig()
    if problem.horizon < 1:
        raise ValueError("plan requires a horizon of at least 1 step")

    def fun_and_grad(flat):
        value, grad, _ = objective_and_gradient(flat, problem)
        return value, grad.ravel()

    lower, upper = problem.bounds.arrays(problem.horizon)
    candidates = []
    failures = 0
    for start in _start_points(problem, config):
        try:
            res = minimize_box_lbfgs(
                fun_and_grad, start.ravel(), lower, upper,
                max_iters=config.max_iters, tol=config.tol,
            )
            states = rollout_model(problem.x0, res.x, problem.params)
        except NonFiniteState:
            failures += 1
            continue
        controls = res.x.reshape(problem.horizon, 2)
        energy = float(np.sum(controls**2))
        feasible = problem.state_bounds.valid(states)
        candidates.append((res, states, controls, energy, feasible))

    if not candidates:
        raise AllRestartsFailed(
            f"all {config.restarts} restarts hit non-finite rollouts"
        )

    pool = [c for c in candidates if c[4]] or candidates
    res, states, controls, _, feasible = min(pool, key=lambda c: (c[0].fun, c[3]))
    actions = np.column_stack([2.0 * controls[:, 0] - 1.0, controls[:, 1]])
    return PlanResult(
        controls=controls,
        actions=actions,
        predicted_states=states,
        objective_trace=res.trace,
        terminal_objective=res.fun,
        status=PlanStatus(res.status),
        restarts_used=len(candidates) + failures,
        projected_gradient_norm=res.projected_gradient_norm,
        feasible=feasible,
    )


# --- gradient verification ----------------------------------------------------

@dataclass
class GradientCheckReport:
    max_rel_error: float
    median_rel_error: float
    kink_skips: int
    n_checked: int


def _near_activation_kink(problem: PlanProblem, controls, margin: float) -> bool:
    """LeakyReLU only: is any hidden pre-activation within margin of 0?"""
    if problem.policy.activation != "leaky_relu":
        return False
    states = rollout_model(problem.x0, controls, problem.params)
    obs = observe(LanderState.from_vector(states[-1]), problem.obs_scales)
    p = problem.policy
    z1 = p.w1 @ obs + p.b1
    z2 = p.w2 @ p._act(z1) + p.b2
    return bool(np.min(np.abs(np.concatenate([z1, z2]))) < margin)


def gradient_check(problem: PlanProblem, n_samples: int = 100, seed: int = 0,
                   fd_step: float = 1e-6,
                   kink_margin: float = 1e-4) -> GradientCheckReport:
    """Compare the adjoint gradient with central finite differences."""
    if problem.horizon == 0:
        return GradientCheckReport(0.0, 0.0, 0, 0)
    rng = np.random.default_rng(seed)
    lower, upper = problem.bounds.arrays(problem.horizon)
    errors = []
    skips = 0
    for _ in range(n_samples):
        flat = rng.uniform(lower, upper)
        if _near_activation_kink(problem, flat, kink_margin):
            skips += 1
            continue
        _, grad, _ = objective_and_gradient(flat, problem)
        grad = grad.ravel()
        fd = np.empty_like(flat)
        for i in range(flat.size):
            bumped = flat.copy()
            bumped[i] = flat[i] + fd_step
            hi = objective(bumped, problem)
            bumped[i] = flat[i] - fd_step
            lo = objective(bumped, problem)
            fd[i] = (hi - lo) / (2.0 * fd_step)
        scale = max(float(np.max(np.abs(fd))), 1e-8)
        errors.append(float(np.max(np.abs(fd - grad))) / scale)
    if not errors:
        return GradientCheckReport(0.0, 0.0, skips, 0)
    return GradientCheckReport(
        max_rel_error=float(np.max(errors)),
        median_rel_error=float(np.median(errors)),
        kink_skips=skips,
        n_checked=len(errors),
    )


def planted_goal_problem(policy: PolicyNet, rng: np.random.Generator,
                         horizon: int = 40,
                         params: PhysicsParams | None = None,
                         obs_scales: ObservationScales | None = None
                         ) -> tuple[PlanProblem, np.ndarray]:
    """A problem whose goal latent is reachable by a known control sequence.

    Used by tests and fixture generation: the returned controls achieve
    objective exactly 0, so the planner's optimum is known.
    """
    params = params or PhysicsParams()
    obs_scales = obs_scales or ObservationScales()
    bounds = ControlBounds()
    state_bounds = StateBounds()
    for _ in range(200):
        x0 = LanderState(
            x=float(rng.uniform(-0.4, 0.4)),
            y=float(rng.uniform(1.0, 1.6)),
            vx=float(rng.uniform(-0.3, 0.3)),
            vy=float(rng.uniform(-0.5, 0.1)),
            angle=float(rng.uniform(-0.2, 0.2)),
            angular_velocity=float(rng.uniform(-0.1, 0.1)),
        )
        controls = np.column_stack([
            rng.uniform(0.0, 1.0, horizon), rng.uniform(-1.0, 1.0, horizon),
        ])
        states = rollout_model(x0, controls, params)
        if not state_bounds.valid(states):
            continue
        obs = observe(LanderState.from_vector(states[-1]), obs_scales)
        problem = PlanProblem(
            x0=x0, z_goal=policy.latent(obs), horizon=horizon, policy=policy,
            params=params, obs_scales=obs_scales, bounds=bounds,
            state_bounds=state_bounds,
        )
        return problem, controls
    raise RuntimeError("could not sample a valid planted-goal rollout")
