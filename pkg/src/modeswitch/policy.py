"""Dense two-hidden-layer control policies.

A policy maps the 8-component observation through two hidden layers to a
tanh-squashed engine command pair. The post-activation vector of the second
hidden layer is the policy's latent point; everything downstream (embedding,
matching, planning) works on that vector. Activations are Mish or LeakyReLU
so the latent map stays differentiable enough for gradient-based planning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteParameter, SchemaMismatch, ShapeMismatch
from .lander import Action, EnvConfig, LanderEnv, TerminalEvent, observe

POLICY_FILE_VERSION = 1
OBS_DIM = 8
ACTION_DIM = 2


# --- activations ------------------------------------------------------------

def softplus(x):
    """log(1 + e^x) computed without overflow for large |x|."""
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def mish(x):
    x = np.asarray(x, dtype=float)
    return x * np.tanh(softplus(x))


def mish_prime(x):
    x = np.asarray(x, dtype=float)
    t = np.tanh(softplus(x))
    return t + x * (1.0 - t * t) * _sigmoid(x)


def leaky_relu(x, alpha: float):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0.0, x, alpha * x)


def leaky_relu_prime(x, alpha: float):
    """Derivative; at the kink x = 0 the alpha branch is used by convention."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0.0, 1.0, alpha)


# --- the network ------------------------------------------------------------

@dataclass(frozen=True)
class PolicyNet:
    """Immutable dense policy: 8 -> h1 -> h2 -> 2 with tanh output squash."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    activation: str = "mish"
    alpha: float = 0.01
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = {}
        for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        h1, obs = arrays["w1"].shape
        if obs != OBS_DIM:
            raise ShapeMismatch(f"w1 must have {OBS_DIM} input columns, got {obs}")
        if arrays["b1"].shape != (h1,):
            raise ShapeMismatch("b1 does not match w1 rows")
        h2 = arrays["w2"].shape[0]
        if arrays["w2"].shape != (h2, h1) or arrays["b2"].shape != (h2,):
            raise ShapeMismatch("hidden layer 2 shapes do not chain from layer 1")
        if arrays["w3"].shape != (ACTION_DIM, h2) or arrays["b3"].shape != (ACTION_DIM,):
            raise ShapeMismatch("output layer shapes do not chain from layer 2")
        for name, arr in arrays.items():
            if not np.all(np.isfinite(arr)):
                raise NonFiniteParameter(f"{name} contains non-finite values")
        if self.activation not in ("mish", "leaky_relu"):
            raise SchemaMismatch(f"unknown activation {self.activation!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def hidden_width(self) -> int:
        return self.w2.shape[0]

    @property
    def arch(self) -> list[int]:
        return [OBS_DIM, self.w1.shape[0], self.hidden_width, ACTION_DIM]

    def _act(self, z):
        if self.activation == "mish":
            return mish(z)
        return leaky_relu(z, self.alpha)

    def _act_prime(self, z):
        if self.activation == "mish":
            return mish_prime(z)
        return leaky_relu_prime(z, self.alpha)

    def forward_full(self, obs) -> tuple[np.ndarray, np.ndarray]:
        """(action vector, latent vector) in one pass."""
        obs = np.asarray(obs, dtype=float)
        a1 = self._act(self.w1 @ obs + self.b1)
        a2 = self._act(self.w2 @ a1 + self.b2)
        return np.tanh(self.w3 @ a2 + self.b3), a2

    def forward(self, obs) -> np.ndarray:
        """Tanh-squashed engine commands, each in [-1, 1]."""
        return self.forward_full(obs)[0]

    def act(self, obs) -> Action:
        out = self.forward(obs)
        return Action(float(out[0]), float(out[1]))

    def latent(self, obs) -> np.ndarray:
        """Post-activation vector of hidden layer 2 (the latent point)."""
        return self.forward_full(obs)[1]

    def latent_jacobian(self, obs) -> np.ndarray:
        """Analytic d(latent)/d(obs), shape (hidden_width, 8)."""
        obs = np.asarray(obs, dtype=float)
        z1 = self.w1 @ obs + self.b1
        a1 = self._act(z1)
        z2 = self.w2 @ a1 + self.b2
        inner = self._act_prime(z1)[:, None] * self.w1
        return self._act_prime(z2)[:, None] * (self.w2 @ inner)

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([
            self.w1.ravel(), self.b1, self.w2.ravel(), self.b2,
            self.w3.ravel(), self.b3,
        ])

    @classmethod
    def from_flat(cls, flat, hidden1: int, hidden2: int,
                  activation: str = "mish", alpha: float = 0.01,
                  meta: dict | None = None) -> "PolicyNet":
        flat = np.asarray(flat, dtype=float)
        sizes = [hidden1 * OBS_DIM, hidden1, hidden2 * hidden1, hidden2,
                 ACTION_DIM * hidden2, ACTION_DIM]
        if flat.shape != (sum(sizes),):
            raise ShapeMismatch(
                f"flat vector has {flat.size} entries, expected {sum(sizes)}"
            )
        parts = np.split(flat, np.cumsum(sizes)[:-1])
        return cls(
            parts[0].reshape(hidden1, OBS_DIM), parts[1],
            parts[2].reshape(hidden2, hidden1), parts[3],
            parts[4].reshape(ACTION_DIM, hidden2), parts[5],
            activation=activation, alpha=alpha, meta=dict(meta or {}),
        )

    @classmethod
    def random(cls, rng: np.random.Generator, hidden1: int = 64,
               hidden2: int | None = None, activation: str = "mish",
               alpha: float = 0.01, scale: float = 1.0) -> "PolicyNet":
        """He-style random init, used for trainer seeds and test fixtures."""
        hidden2 = hidden1 if hidden2 is None else hidden2
        def layer(rows, cols):
            return rng.normal(0.0, scale / np.sqrt(cols), size=(rows, cols))
        return cls(
            layer(hidden1, OBS_DIM), np.zeros(hidden1),
            layer(hidden2, hidden1), np.zeros(hidden2),
            layer(ACTION_DIM, hidden2), np.zeros(ACTION_DIM),
            activation=activation, alpha=alpha,
        )

    def equal_parameters(self, other: "PolicyNet") -> bool:
        return (
            self.activation == other.activation
            and self.alpha == other.alpha
            and all(
                np.array_equal(getattr(self, n), getattr(other, n))
                for n in ("w1", "b1", "w2", "b2", "w3", "b3")
            )
        )


# module-level aliases matching the operation names used across the package
def forward(policy: PolicyNet, obs) -> np.ndarray:
    return policy.forward(obs)


def latent(policy: PolicyNet, obs) -> np.ndarray:
    return policy.latent(obs)


def latent_jacobian(policy: PolicyNet, obs) -> np.ndarray:
    return policy.latent_jacobian(obs)


# --- serialization ----------------------------------------------------------

def save_policy(policy: PolicyNet, path) -> None:
    doc = {
        "version": POLICY_FILE_VERSION,
        "arch": policy.arch,
        "activation": {"name": policy.activation, "alpha": policy.alpha},
        "weights": [policy.w1.tolist(), policy.w2.tolist(), policy.w3.tolist()],
        "biases": [policy.b1.tolist(), policy.b2.tolist(), policy.b3.tolist()],
        "meta": policy.meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def load_policy(path) -> PolicyNet:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path} is not valid JSON: {exc}") from exc
    for key in ("version", "arch", "activation", "weights", "biases"):
        if key not in doc:
            raise SchemaMismatch(f"{path} is missing field {key!r}")
    if doc["version"] != POLICY_FILE_VERSION:
        raise SchemaMismatch(
            f"unsupported policy file version {doc['version']!r}"
        )
    if len(doc["weights"]) != 3 or len(doc["biases"]) != 3:
        raise SchemaMismatch("expected exactly three weight and bias arrays")
    act = doc["activation"]
    if not isinstance(act, dict) or "name" not in act:
        raise SchemaMismatch("activation must be an object with a name")
    try:
        weights = [np.array(w, dtype=float) for w in doc["weights"]]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
    except (TypeError, ValueError) as exc:
        raise ShapeMismatch(f"ragged parameter arrays in {path}") from exc
    arch = doc["arch"]
    expected = [
        (arch[1], arch[0]), (arch[2], arch[1]), (arch[3], arch[2]),
    ] if len(arch) == 4 else None
    if expected is None or [w.shape for w in weights] != expected:
        raise ShapeMismatch(
            f"arch {arch} does not match stored weight shapes "
            f"{[w.shape for w in weights]}"
        )
    return PolicyNet(
        weights[0], biases[0], weights[1], biases[1], weights[2], biases[2],
        activation=act["name"], alpha=float(act.get("alpha") or 0.01),
        meta=doc.get("meta", {}),
    )


# --- rollout evaluation -----------------------------------------------------

SOLVED_THRESHOLD = 200.0


@dataclass
class EvalStats:
    mean_return: float
    min_return: float
    max_return: float
    returns: list[float]
    outcome_counts: dict[str, int]
    solved_fraction: float


def episode_seeds(master_seed: int, n: int) -> list[int]:
    """Stable per-episode seeds derived from one master seed."""
    ss = np.random.SeedSequence(master_seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(n)]


def run_episode(policy: PolicyNet, env: LanderEnv, init=None,
                max_steps: int | None = None):
    """Roll the policy until termination; returns (return, event, n_steps)."""
    state = env.reset(init)
    total = 0.0
    steps = 0
    event = TerminalEvent.NONE
    limit = max_steps if max_steps is not None else env.config.world.max_steps
    while not event.terminal and steps < limit:
        obs = observe(state, env.config.obs_scales)
        state, r, event = env.step(policy.act(obs))
        total += r
        steps += 1
    return total, event, steps


def evaluate_policy(policy: PolicyNet, env_config: EnvConfig | None,
                    n_episodes: int, seed: int = 0) -> EvalStats:
    """Deterministic evaluation over sampled initial states."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    cfg = env_config or EnvConfig()
    env = LanderEnv(cfg)
    returns = []
    counts: dict[str, int] = {}
    solved = 0
    for ep_seed in episode_seeds(seed, n_episodes):
        rng = np.random.default_rng(ep_seed)
        init = cfg.sampler.sample(rng)
        total, event, _ = run_episode(policy, env, init)
        returns.append(total)
        if total >= SOLVED_THRESHOLD:
            solved += 1
            key = "solved"
        else:
            key = event.value if event.terminal else "timeout"
        counts[key] = counts.get(key, 0) + 1
    return EvalStats(
        mean_return=float(np.mean(returns)),
        min_return=float(np.min(returns)),
        max_return=float(np.max(returns)),
        returns=returns,
        outcome_counts=counts,
        solved_fraction=solved / n_episodes,
    )
