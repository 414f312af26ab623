"""Episode records and the on-disk dataset layout.

A dataset directory holds one CSV per episode plus an index file, the
environment config snapshot, the policy that produced the rollouts, and
(optionally) the embedding tables. All floats are written with repr so a
reloaded dataset replays bit-exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import SchemaMismatch
from .lander import EnvConfig, LanderState, TerminalEvent, load_env_config, save_env_config
from .policy import SOLVED_THRESHOLD, PolicyNet, load_policy, save_policy

INDEX_FILE = "index.csv"
ENV_CONFIG_FILE = "env_config.txt"
POLICY_FILE = "policy.json"
EPISODE_DIR = "episodes"
EMBEDDING_FILE = "embedding.csv"
EMBEDDING_LOSS_FILE = "embedding_loss.csv"


class Outcome(Enum):
    SOLVED = "solved"
    CRASHED = "crashed"
    TIMEOUT = "timeout"
    OUT_OF_BOUNDS = "out_of_bounds"


def label_outcome(cumulative: float, event: TerminalEvent) -> Outcome:
    """Solved at >= 200 points (inclusive); otherwise by terminal event.

    A Landed episode below the threshold falls into the Timeout failure
    class (the catch-all "did not solve in time" label).
    """
    if cumulative >= SOLVED_THRESHOLD:
        return Outcome.SOLVED
    if event is TerminalEvent.CRASHED:
        return Outcome.CRASHED
    if event is TerminalEvent.OUT_OF_BOUNDS:
        return Outcome.OUT_OF_BOUNDS
    return Outcome.TIMEOUT


_STATE_COLS = ["x", "y", "vx", "vy", "angle", "angular_velocity"]
_OBS_COLS = [f"obs{i}" for i in range(1, 9)]
_ACTION_COLS = ["action_main", "action_side"]


@dataclass
class EpisodeRecord:
    """Per-step log of one episode plus its terminal bookkeeping.

    Row t holds the state *before* action t, the observation/latent computed
    from it, and the reward received for the transition. One trailing row
    (no action/reward) stores the terminal state so traces cover it.
    """

    episode_id: str
    seed: int | None
    states: np.ndarray         # (n+1, 6) including the terminal state
    leg_flags: np.ndarray      # (n+1, 2) int
    observations: np.ndarray   # (n+1, 8)
    latents: np.ndarray        # (n+1, h)
    actions: np.ndarray        # (n, 2)
    rewards: np.ndarray        # (n,)
    final_event: TerminalEvent
    cumulative_reward: float
    outcome: Outcome

    @property
    def n_steps(self) -> int:
        return len(self.actions)

    @property
    def latent_dim(self) -> int:
        return self.latents.shape[1]

    def state_at(self, step: int) -> LanderState:
        return LanderState.from_vector(
            self.states[step], int(self.leg_flags[step, 0]),
            int(self.leg_flags[step, 1]),
        )

    def latent_at(self, step: int) -> np.ndarray:
        return self.latents[step]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpisodeRecord):
            return NotImplemented
        return (
            self.episode_id == other.episode_id
            and self.seed == other.seed
            and self.final_event == other.final_event
            and self.cumulative_reward == other.cumulative_reward
            and self.outcome == other.outcome
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("states", "leg_flags", "observations", "latents",
                             "actions", "rewards")
            )
        )


def _fmt(value: float) -> str:
    return repr(float(value))


def write_episode_csv(record: EpisodeRecord, path, include_latents: bool = True) -> None:
    """One row per step: index, state, observation, action, reward, event.

    Latent columns are appended when requested (the dataset format); without
    them the file is the plain simulator episode log.
    """
    header = ["step"] + _STATE_COLS + _OBS_COLS + _ACTION_COLS + ["reward", "event"]
    if include_latents:
        header += [f"z{i}" for i in range(1, record.latent_dim + 1)]
    rows = []
    total = record.states.shape[0]
    for t in range(total):
        terminal_row = t == total - 1
        row = [str(t)]
        row += [_fmt(v) for v in record.states[t]]
        row += [_fmt(v) for v in record.observations[t]]
        if terminal_row:
            row += ["", "", "", record.final_event.value]
        else:
            row += [_fmt(v) for v in record.actions[t]]
            row += [_fmt(record.rewards[t]), TerminalEvent.NONE.value]
        if include_latents:
            row += [_fmt(v) for v in record.latents[t]]
        rows.append(row)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_episode_csv(path, episode_id: str, seed: int | None,
                     cumulative: float, outcome: Outcome) -> EpisodeRecord:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    latent_dim = sum(1 for name in header if name.startswith("z"))
    n_total = len(rows)
    states = np.empty((n_total, 6))
    obs = np.empty((n_total, 8))
    latents = np.empty((n_total, latent_dim))
    actions = np.empty((n_total - 1, 2))
    rewards = np.empty(n_total - 1)
    final_event = TerminalEvent.NONE
    for t, row in enumerate(rows):
        states[t] = [float(v) for v in row[1:7]]
        obs[t] = [float(v) for v in row[7:15]]
        if t < n_total - 1:
            actions[t] = [float(row[15]), float(row[16])]
            rewards[t] = float(row[17])
        else:
            final_event = TerminalEvent(row[18])
        if latent_dim:
            latents[t] = [float(v) for v in row[19:19 + latent_dim]]
    leg_flags = obs[:, 6:8].astype(int)
    return EpisodeRecord(
        episode_id=episode_id, seed=seed, states=states, leg_flags=leg_flags,
        observations=obs, latents=latents, actions=actions, rewards=rewards,
        final_event=final_event, cumulative_reward=cumulative, outcome=outcome,
    )


@dataclass
class Dataset:
    records: list[EpisodeRecord]
    env_config: EnvConfig
    policy: PolicyNet | None = None
    directory: Path | None = None
    _by_id: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_id = {r.episode_id: r for r in self.records}

    def get(self, episode_id: str) -> EpisodeRecord:
        if str(episode_id) not in self._by_id:
            raise KeyError(f"unknown episode {episode_id!r}")
        return self._by_id[str(episode_id)]

    def latent_matrix(self, episode_ids: list[str] | None = None):
        """Stacked latents with (episode_id, step, outcome) row labels."""
        records = (self.records if episode_ids is None
                   else [self.get(e) for e in episode_ids])
        ids, steps, outcomes, blocks = [], [], [], []
        for rec in records:
            n = rec.states.shape[0]
            ids += [rec.episode_id] * n
            steps += list(range(n))
            outcomes += [rec.outcome.value] * n
            blocks.append(rec.latents)
        if not blocks:
            return [], [], [], np.empty((0, 0))
        return ids, steps, outcomes, np.vstack(blocks)


def write_dataset(records: list[EpisodeRecord], directory,
                  env_config: EnvConfig, policy: PolicyNet | None = None) -> Path:
    directory = Path(directory)
    (directory / EPISODE_DIR).mkdir(parents=True, exist_ok=True)
    save_env_config(env_config, directory / ENV_CONFIG_FILE)
    if policy is not None:
        save_policy(policy, directory / POLICY_FILE)
    with open(directory / INDEX_FILE, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["episode_id", "seed", "outcome", "cumulative_reward",
                         "n_steps", "event"])
        for rec in records:
            writer.writerow([
                rec.episode_id,
                "" if rec.seed is None else str(rec.seed),
                rec.outcome.value, _fmt(rec.cumulative_reward),
                str(rec.n_steps), rec.final_event.value,
            ])
            write_episode_csv(rec, directory / EPISODE_DIR / f"ep_{rec.episode_id}.csv")
    return directory


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    if not (directory / INDEX_FILE).exists():
        raise SchemaMismatch(f"{directory} has no {INDEX_FILE}")
    env_config = (load_env_config(directory / ENV_CONFIG_FILE)
                  if (directory / ENV_CONFIG_FILE).exists() else EnvConfig())
    policy = (load_policy(directory / POLICY_FILE)
              if (directory / POLICY_FILE).exists() else None)
    records = []
    with open(directory / INDEX_FILE, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            records.append(read_episode_csv(
                directory / EPISODE_DIR / f"ep_{row['episode_id']}.csv",
                episode_id=row["episode_id"],
                seed=int(row["seed"]) if row["seed"] else None,
                cumulative=float(row["cumulative_reward"]),
                outcome=Outcome(row["outcome"]),
            ))
    return Dataset(records, env_config, policy, directory)


def write_embedding_tables(directory, ids, steps, outcomes, coords,
                           loss_history) -> None:
    directory = Path(directory)
    with open(directory / EMBEDDING_FILE, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["point_id", "episode_id", "step", "y1", "y2", "outcome"])
        for pid, (eid, step, out, (y1, y2)) in enumerate(
                zip(ids, steps, outcomes, coords)):
            writer.writerow([str(pid), eid, str(step), _fmt(y1), _fmt(y2), out])
    with open(directory / EMBEDDING_LOSS_FILE, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "loss"])
        for i, value in enumerate(loss_history):
            writer.writerow([str(i), _fmt(value)])


def read_embedding_table(directory) -> list[dict]:
    path = Path(directory) / EMBEDDING_FILE
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for row in csv.DictReader(fh):
            rows.append({
                "point_id": int(row["point_id"]),
                "episode_id": row["episode_id"],
                "step": int(row["step"]),
                "y1": float(row["y1"]),
                "y2": float(row["y2"]),
                "outcome": row["outcome"],
            })
    return rows


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
