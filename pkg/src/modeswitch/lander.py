"""Deterministic planar lunar-lander simulator.

State is (x, y, vx, vy, angle, angular velocity) plus two leg-contact flags.
The airborne dynamics are analytic (thrust rotated by the body angle, constant
gravity, torque proportional to side thrust), integrated with semi-implicit
Euler. Contact is a simplified leg model: leg tips touch the ground, absorb a
bounded amount of vertical speed per step, and settle the craft; impacts the
legs cannot absorb sink the body below ground level and crash.

There is no noise anywhere: equal initial states and action sequences produce
bitwise-equal trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import InvalidInitialState, NonDifferentiablePoint, StepOnTerminalState


class TerminalEvent(Enum):
    NONE = "none"
    LANDED = "landed"
    CRASHED = "crashed"
    OUT_OF_BOUNDS = "out_of_bounds"
    TIMEOUT = "timeout"

    @property
    def terminal(self) -> bool:
        return self is not TerminalEvent.NONE


@dataclass(frozen=True)
class LanderState:
    """Full lander state: positions, velocities, attitude, and leg flags.

    y = 0 is pad level; angle = 0 is upright. Leg flags are 0/1.
    """

    x: float = 0.0
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    angle: float = 0.0
    angular_velocity: float = 0.0
    leg1: int = 0
    leg2: int = 0

    def __post_init__(self):
        vec = (self.x, self.y, self.vx, self.vy, self.angle, self.angular_velocity)
        if not all(math.isfinite(v) for v in vec):
            raise ValueError(f"non-finite lander state: {vec}")
        if self.leg1 not in (0, 1) or self.leg2 not in (0, 1):
            raise ValueError(f"leg flags must be 0/1, got {self.leg1}, {self.leg2}")

    def as_vector(self) -> np.ndarray:
        """The six continuous components as a float array (no leg flags)."""
        return np.array(
            [self.x, self.y, self.vx, self.vy, self.angle, self.angular_velocity],
            dtype=float,
        )

    @classmethod
    def from_vector(cls, vec, leg1: int = 0, leg2: int = 0) -> "LanderState":
        x, y, vx, vy, angle, angular_velocity = (float(v) for v in vec)
        return cls(x, y, vx, vy, angle, angular_velocity, int(leg1), int(leg2))


@dataclass(frozen=True)
class Action:
    """Main/side engine commands, clamped to [-1, 1] on construction."""

    main: float = 0.0
    side: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "main", min(1.0, max(-1.0, float(self.main))))
        object.__setattr__(self, "side", min(1.0, max(-1.0, float(self.side))))

    def as_vector(self) -> np.ndarray:
        return np.array([self.main, self.side], dtype=float)


@dataclass(frozen=True)
class PhysicsParams:
    """Constants of the analytic airborne dynamics."""

    mass: float = 1.0
    inertia: float = 1.0
    gravity: float = 9.8
    main_thrust: float = 20.0
    side_thrust: float = 1.6
    torque_scale: float = 1.0
    dt: float = 0.02

    def __post_init__(self):
        for name in ("mass", "inertia", "main_thrust", "side_thrust", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class WorldConfig:
    """Contact geometry, termination rules, and world bounds."""

    leg_span: float = 0.12       # horizontal offset of each leg tip from center
    leg_drop: float = 0.16       # vertical drop of the leg tips below center
    contact_tol: float = 0.01    # tip height below which a leg counts as touching
    leg_absorb: float = 0.5      # max downward speed the legs remove per step
    slide_retain: float = 0.25   # ground friction retention for vx / angular vel
    settle_retain: float = 0.7   # per-step attitude relaxation while grounded
    tilt_limit: float = math.pi / 3
    rest_speed: float = 0.05
    rest_steps: int = 10
    half_width: float = 1.5
    max_steps: int = 1000

    @property
    def leg_contact_height(self) -> float:
        """Above this body height no leg can reach the ground at any attitude."""
        return math.hypot(self.leg_span, self.leg_drop) + self.contact_tol


@dataclass(frozen=True)
class RewardConfig:
    """Shaping weights, control costs, and terminal bonus."""

    w_dist: float = 100.0
    w_vel: float = 100.0
    w_angle: float = 100.0
    w_legs: float = 10.0
    c_main: float = 0.30
    c_side: float = 0.03
    terminal_bonus: float = 100.0


@dataclass(frozen=True)
class ObservationScales:
    position: float = 1.0
    velocity: float = 1.0
    angular: float = 1.0


def gate_action(action: Action) -> tuple[float, float]:
    """Map engine commands to effective throttles.

    The main engine fires only for positive commands, at (main+1)/2 of full
    thrust; the side command passes through with no dead zone.
    """
    main_throttle = (action.main + 1.0) / 2.0 if action.main > 0.0 else 0.0
    return main_throttle, action.side


def dynamics_effective(state_vec, main_throttle: float, side_throttle: float,
                       params: PhysicsParams) -> np.ndarray:
    """State derivative given effective throttles (no gating)."""
    _, _, vx, vy, angle, angular_velocity = (float(v) for v in state_vec)
    s, c = math.sin(angle), math.cos(angle)
    fm = main_throttle * params.main_thrust
    fs = side_throttle * params.side_thrust
    return np.array(
        [
            vx,
            vy,
            (-s * fm + c * fs) / params.mass,
            (c * fm + s * fs - params.gravity) / params.mass,
            angular_velocity,
            params.torque_scale * side_throttle / params.inertia,
        ]
    )


def dynamics(state: LanderState, action: Action, params: PhysicsParams) -> np.ndarray:
    """State derivative of the airborne model for a raw (gated) action."""
    main_throttle, side_throttle = gate_action(action)
    return dynamics_effective(state.as_vector(), main_throttle, side_throttle, params)


def _jacobians_effective(angle: float, main_throttle: float, side_throttle: float,
                         params: PhysicsParams) -> tuple[np.ndarray, np.ndarray]:
    s, c = math.sin(angle), math.cos(angle)
    fm = main_throttle * params.main_thrust
    fs = side_throttle * params.side_thrust
    m = params.mass

    a = np.zeros((6, 6))
    a[0, 2] = 1.0
    a[1, 3] = 1.0
    a[4, 5] = 1.0
    a[2, 4] = (-c * fm - s * fs) / m
    a[3, 4] = (-s * fm + c * fs) / m

    b = np.zeros((6, 2))
    b[2, 0] = -s * params.main_thrust / m
    b[3, 0] = c * params.main_thrust / m
    b[2, 1] = c * params.side_thrust / m
    b[3, 1] = s * params.side_thrust / m
    b[5, 1] = params.torque_scale / params.inertia
    return a, b


def dynamics_jacobians(state: LanderState, action: Action, params: PhysicsParams,
                       *, wrt_raw_action: bool = False,
                       kink_tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Analytic Jacobians (A, B) of `dynamics`.

    A is d(state derivative)/d(state). By default B is taken w.r.t. the
    effective throttles (a total function). With wrt_raw_action=True, B is
    chained through the main-engine gate and the call fails within kink_tol
    of the gate kink at main = 0.
    """
    main_throttle, side_throttle = gate_action(action)
    a, b = _jacobians_effective(state.angle, main_throttle, side_throttle, params)
    if wrt_raw_action:
        if abs(action.main) < kink_tol:
            raise NonDifferentiablePoint(
                f"main command {action.main!r} is within {kink_tol} of the gate kink"
            )
        gate_slope = 0.5 if action.main > 0.0 else 0.0
        b[:, 0] *= gate_slope
    return a, b


def advance(state_vec: np.ndarray, main_throttle: float, side_throttle: float,
            params: PhysicsParams) -> np.ndarray:
    """One semi-implicit Euler step of the airborne model (velocities first)."""
    x, y, vx, vy, angle, angular_velocity = (float(v) for v in state_vec)
    deriv = dynamics_effective(state_vec, main_throttle, side_throttle, params)
    dt = params.dt
    vx += dt * deriv[2]
    vy += dt * deriv[3]
    angular_velocity += dt * deriv[5]
    x += dt * vx
    y += dt * vy
    angle += dt * angular_velocity
    return np.array([x, y, vx, vy, angle, angular_velocity])


def step_jacobians(state_vec, main_throttle: float, side_throttle: float,
                   params: PhysicsParams) -> tuple[np.ndarray, np.ndarray]:
    """Exact Jacobians of `advance` w.r.t. state and effective throttles.

    Velocity rows are I + dt*A; position rows pick up the extra dt^2 terms of
    the semi-implicit update.
    """
    angle = float(state_vec[4])
    a, b = _jacobians_effective(angle, main_throttle, side_throttle, params)
    dt = params.dt
    eye = np.eye(6)
    ad = np.zeros((6, 6))
    bd = np.zeros((6, 2))
    for vel_row in (2, 3, 5):
        ad[vel_row] = eye[vel_row] + dt * a[vel_row]
        bd[vel_row] = dt * b[vel_row]
    for pos_row, vel_row in ((0, 2), (1, 3), (4, 5)):
        ad[pos_row] = eye[pos_row] + dt * ad[vel_row]
        bd[pos_row] = dt * bd[vel_row]
    return ad, bd


def leg_tip_heights(y: float, angle: float, world: WorldConfig) -> tuple[float, float]:
    """Ground clearance of the two leg tips (body-frame offsets rotated)."""
    s, c = math.sin(angle), math.cos(angle)
    drop = world.leg_drop * c
    shift = world.leg_span * s
    return y - shift - drop, y + shift - drop


def observe(state: LanderState, scales: ObservationScales | None = None) -> np.ndarray:
    """The 8-component policy observation (scaled state plus leg flags)."""
    sc = scales or ObservationScales()
    return np.array(
        [
            state.x * sc.position,
            state.y * sc.position,
            state.vx * sc.velocity,
            state.vy * sc.velocity,
            state.angle,
            state.angular_velocity * sc.angular,
            float(state.leg1),
            float(state.leg2),
        ]
    )


def shaping(state: LanderState, cfg: RewardConfig) -> float:
    """Potential used by the per-step reward."""
    return (
        -cfg.w_dist * math.hypot(state.x, state.y)
        - cfg.w_vel * math.hypot(state.vx, state.vy)
        - cfg.w_angle * abs(state.angle)
        + cfg.w_legs * (state.leg1 + state.leg2)
    )


def _reward_from_throttles(prev: LanderState, next_state: LanderState,
                           main_throttle: float, side_throttle: float,
                           event: TerminalEvent, cfg: RewardConfig) -> float:
    value = (
        shaping(next_state, cfg)
        - shaping(prev, cfg)
        - cfg.c_main * main_throttle
        - cfg.c_side * abs(side_throttle)
    )
    if event is TerminalEvent.LANDED:
        value += cfg.terminal_bonus
    elif event in (TerminalEvent.CRASHED, TerminalEvent.OUT_OF_BOUNDS):
        value -= cfg.terminal_bonus
    return value


def reward(prev: LanderState, next_state: LanderState, action: Action,
           event: TerminalEvent, cfg: RewardConfig | None = None) -> float:
    """Shaping difference minus control costs plus the terminal bonus."""
    cfg = cfg or RewardConfig()
    main_throttle, side_throttle = gate_action(action)
    return _reward_from_throttles(
        prev, next_state, main_throttle, side_throttle, event, cfg
    )


class StepResult(NamedTuple):
    state: LanderState
    reward: float
    event: TerminalEvent
    rest_count: int


def step(state: LanderState, action: Action, params: PhysicsParams | None = None,
         world: WorldConfig | None = None, rewards: RewardConfig | None = None,
         *, rest_count: int = 0, elapsed_steps: int = 0,
         effective: tuple[float, float] | None = None) -> StepResult:
    """One full transition: integrate, resolve contact, score, classify.

    `rest_count`/`elapsed_steps` carry the landed/timeout bookkeeping between
    calls (LanderEnv does this for you). `effective` bypasses the engine gate
    and drives the throttles directly, which is how planned control segments
    are executed.
    """
    params = params or PhysicsParams()
    world = world or WorldConfig()
    rewards = rewards or RewardConfig()

    if effective is not None:
        main_throttle, side_throttle = effective
    else:
        main_throttle, side_throttle = gate_action(action)

    vec = advance(state.as_vector(), main_throttle, side_throttle, params)
    x, y, vx, vy, angle, angular_velocity = (float(v) for v in vec)

    event = TerminalEvent.NONE
    leg1 = leg2 = 0
    tip1, tip2 = leg_tip_heights(y, angle, world)
    if min(tip1, tip2) <= 0.0:
        if abs(angle) > world.tilt_limit or y <= 0.0:
            event = TerminalEvent.CRASHED
        else:
            if vy < 0.0:
                vy = min(0.0, vy + world.leg_absorb)
            if vy == 0.0:
                # Settled on the legs: resolve penetration, brake, level out.
                y += max(0.0, -min(tip1, tip2))
                vx *= world.slide_retain
                angular_velocity *= world.slide_retain
                angle *= world.settle_retain
            tip1, tip2 = leg_tip_heights(y, angle, world)
        leg1 = int(tip1 <= world.contact_tol)
        leg2 = int(tip2 <= world.contact_tol)

    next_state = LanderState(x, y, vx, vy, angle, angular_velocity, leg1, leg2)

    if event is TerminalEvent.NONE and abs(x) > world.half_width:
        event = TerminalEvent.OUT_OF_BOUNDS

    at_rest = (
        leg1 == 1 and leg2 == 1
        and abs(vx) <= world.rest_speed and abs(vy) <= world.rest_speed
    )
    rest_count = rest_count + 1 if at_rest else 0
    if event is TerminalEvent.NONE and rest_count >= world.rest_steps:
        event = TerminalEvent.LANDED
    if event is TerminalEvent.NONE and elapsed_steps + 1 >= world.max_steps:
        event = TerminalEvent.TIMEOUT

    step_reward = _reward_from_throttles(
        state, next_state, main_throttle, side_throttle, event, rewards
    )
    return StepResult(next_state, step_reward, event, rest_count)


@dataclass(frozen=True)
class InitialStateSampler:
    """Uniform box sampler for episode initial states (legs always up)."""

    x: tuple[float, float] = (-0.25, 0.25)
    y: tuple[float, float] = (1.1, 1.4)
    vx: tuple[float, float] = (-0.3, 0.3)
    vy: tuple[float, float] = (-0.5, 0.0)
    angle: tuple[float, float] = (-0.15, 0.15)
    angular_velocity: tuple[float, float] = (-0.1, 0.1)

    def sample(self, rng: np.random.Generator) -> LanderState:
        bounds = (self.x, self.y, self.vx, self.vy, self.angle, self.angular_velocity)
        vals = [float(rng.uniform(lo, hi)) for lo, hi in bounds]
        return LanderState.from_vector(vals)

    def widened(self, factor: float) -> "InitialStateSampler":
        """Scale every half-range about its center (used by fixture search)."""
        def widen(lohi):
            lo, hi = lohi
            mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
            return (mid - half * factor, mid + half * factor)
        return InitialStateSampler(
            widen(self.x), widen(self.y), widen(self.vx),
            widen(self.vy), widen(self.angle), widen(self.angular_velocity),
        )


@dataclass(frozen=True)
class EnvConfig:
    """Everything needed to build a reproducible environment."""

    physics: PhysicsParams = field(default_factory=PhysicsParams)
    world: WorldConfig = field(default_factory=WorldConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    obs_scales: ObservationScales = field(default_factory=ObservationScales)
    init: LanderState = field(default_factory=lambda: LanderState(y=1.25))
    sampler: InitialStateSampler = field(default_factory=InitialStateSampler)


class LanderEnv:
    """Stateful wrapper tracking termination bookkeeping across steps."""

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self.state: LanderState | None = None
        self.event = TerminalEvent.NONE
        self.steps = 0
        self._rest_count = 0

    def reset(self, init: LanderState | None = None) -> LanderState:
        state = init if init is not None else self.config.init
        if not all(math.isfinite(v) for v in state.as_vector()):
            raise InvalidInitialState("initial state has non-finite components")
        if state.y < 0.0:
            raise InvalidInitialState(f"initial height {state.y} is below ground")
        if abs(state.x) > self.config.world.half_width:
            raise InvalidInitialState(f"initial x {state.x} is out of bounds")
        self.state = state
        self.event = TerminalEvent.NONE
        self.steps = 0
        self._rest_count = 0
        return state

    def step(self, action: Action,
             effective: tuple[float, float] | None = None
             ) -> tuple[LanderState, float, TerminalEvent]:
        if self.state is None:
            raise StepOnTerminalState("reset() must be called before step()")
        if self.event.terminal:
            raise StepOnTerminalState(f"episode already ended with {self.event}")
        result = step(
            self.state, action, self.config.physics, self.config.world,
            self.config.rewards, rest_count=self._rest_count,
            elapsed_steps=self.steps, effective=effective,
        )
        self.state = result.state
        self.event = result.event
        self._rest_count = result.rest_count
        self.steps += 1
        return result.state, result.reward, result.event

    def observe(self) -> np.ndarray:
        if self.state is None:
            raise StepOnTerminalState("reset() must be called before observe()")
        return observe(self.state, self.config.obs_scales)


# --- plain key = value configuration files ---------------------------------

_STATE_FIELDS = ("x", "y", "vx", "vy", "angle", "angular_velocity")


def env_config_to_mapping(cfg: EnvConfig) -> dict[str, str]:
    out: dict[str, str] = {}
    for prefix, obj in (("physics", cfg.physics), ("world", cfg.world),
                        ("reward", cfg.rewards), ("obs", cfg.obs_scales)):
        for name in obj.__dataclass_fields__:
            out[f"{prefix}.{name}"] = repr(getattr(obj, name))
    for name in _STATE_FIELDS:
        out[f"init.{name}"] = repr(getattr(cfg.init, name))
    for name in _STATE_FIELDS:
        lo, hi = getattr(cfg.sampler, name)
        out[f"sampler.{name}_min"] = repr(lo)
        out[f"sampler.{name}_max"] = repr(hi)
    return out


def env_config_from_mapping(mapping: dict[str, str]) -> EnvConfig:
    base = EnvConfig()

    def build(prefix, cls, default):
        kwargs = {}
        for name, fld in cls.__dataclass_fields__.items():
            key = f"{prefix}.{name}"
            if key in mapping:
                caster = int if fld.type == "int" else float
                kwargs[name] = caster(mapping[key])
        return replace(default, **kwargs) if kwargs else default

    physics = build("physics", PhysicsParams, base.physics)
    world = build("world", WorldConfig, base.world)
    rewards = build("reward", RewardConfig, base.rewards)
    obs_scales = build("obs", ObservationScales, base.obs_scales)

    init_kwargs = {
        name: float(mapping[f"init.{name}"])
        for name in _STATE_FIELDS if f"init.{name}" in mapping
    }
    init = replace(base.init, **init_kwargs) if init_kwargs else base.init

    sampler_kwargs = {}
    for name in _STATE_FIELDS:
        lo_key, hi_key = f"sampler.{name}_min", f"sampler.{name}_max"
        if lo_key in mapping or hi_key in mapping:
            lo, hi = getattr(base.sampler, name)
            lo = float(mapping.get(lo_key, lo))
            hi = float(mapping.get(hi_key, hi))
            sampler_kwargs[name] = (lo, hi)
    sampler = (replace(base.sampler, **sampler_kwargs)
               if sampler_kwargs else base.sampler)

    return EnvConfig(physics, world, rewards, obs_scales, init, sampler)


def load_key_values(path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def load_env_config(path) -> EnvConfig:
    return env_config_from_mapping(load_key_values(path))


def save_env_config(cfg: EnvConfig, path) -> None:
    lines = [f"{key} = {value}" for key, value in env_config_to_mapping(cfg).items()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
