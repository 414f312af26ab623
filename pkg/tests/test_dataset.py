import numpy as np
import pytest

from modeswitch.analysis import collect_rollouts
from modeswitch.dataset import (
    Dataset, Outcome, label_outcome, load_dataset, read_episode_csv,
    write_dataset, write_episode_csv,
)
from modeswitch.errors import SchemaMismatch
from modeswitch.lander import EnvConfig, TerminalEvent


class TestLabelOutcome:
    def test_paper_style_examples(self):
        assert label_outcome(241.0, TerminalEvent.LANDED) is Outcome.SOLVED
        assert label_outcome(-58.0, TerminalEvent.TIMEOUT) is Outcome.TIMEOUT
        assert label_outcome(-115.0, TerminalEvent.CRASHED) is Outcome.CRASHED

    def test_threshold_is_inclusive(self):
        assert label_outcome(200.0, TerminalEvent.LANDED) is Outcome.SOLVED
        assert label_outcome(199.999, TerminalEvent.LANDED) is Outcome.TIMEOUT

    def test_out_of_bounds(self):
        assert (label_outcome(-300.0, TerminalEvent.OUT_OF_BOUNDS)
                is Outcome.OUT_OF_BOUNDS)

    def test_solved_wins_over_event(self):
        assert label_outcome(250.0, TerminalEvent.TIMEOUT) is Outcome.SOLVED


@pytest.fixture(scope="module")
def records():
    from modeswitch.policy import PolicyNet
    rng = np.random.default_rng(0)
    policy = PolicyNet.random(rng, 8, 8, "mish")
    return collect_rollouts(policy, EnvConfig(), 3, seed=11), policy


class TestEpisodeCsv:
    def test_round_trip_is_bit_exact(self, records, tmp_path):
        recs, _ = records
        rec = recs[0]
        path = tmp_path / "ep.csv"
        write_episode_csv(rec, path)
        loaded = read_episode_csv(path, rec.episode_id, rec.seed,
                                  rec.cumulative_reward, rec.outcome)
        assert loaded == rec

    def test_without_latents(self, records, tmp_path):
        recs, _ = records
        path = tmp_path / "ep.csv"
        write_episode_csv(recs[0], path, include_latents=False)
        header = path.read_text().splitlines()[0]
        assert "z1" not in header
        assert header.startswith("step,x,y,")

    def test_cumulative_matches_reward_sum(self, records):
        recs, _ = records
        for rec in recs:
            assert abs(rec.cumulative_reward - rec.rewards.sum()) < 1e-9

    def test_terminal_row_carries_event(self, records, tmp_path):
        recs, _ = records
        path = tmp_path / "ep.csv"
        write_episode_csv(recs[0], path)
        last = path.read_text().splitlines()[-1].split(",")
        assert last[18] == recs[0].final_event.value


class TestDatasetDirectory:
    def test_round_trip(self, records, tmp_path):
        recs, policy = records
        write_dataset(recs, tmp_path / "ds", EnvConfig(), policy)
        data = load_dataset(tmp_path / "ds")
        assert len(data.records) == len(recs)
        for a, b in zip(data.records, recs):
            assert a == b
        assert data.policy.equal_parameters(policy)
        assert data.env_config == EnvConfig()

    def test_get_unknown_episode(self, records, tmp_path):
        recs, policy = records
        write_dataset(recs, tmp_path / "ds", EnvConfig(), policy)
        data = load_dataset(tmp_path / "ds")
        with pytest.raises(KeyError):
            data.get("999999")

    def test_missing_index_rejected(self, tmp_path):
        with pytest.raises(SchemaMismatch):
            load_dataset(tmp_path)

    def test_latent_matrix_shapes(self, records):
        recs, _ = records
        data = Dataset(recs, EnvConfig())
        ids, steps, outcomes, latents = data.latent_matrix()
        assert len(ids) == len(steps) == len(outcomes) == latents.shape[0]
        assert latents.shape[0] == sum(r.states.shape[0] for r in recs)
        assert latents.shape[1] == recs[0].latent_dim

    def test_latent_matrix_subset(self, records):
        recs, _ = records
        data = Dataset(recs, EnvConfig())
        ids, _, _, latents = data.latent_matrix([recs[1].episode_id])
        assert set(ids) == {recs[1].episode_id}
        assert latents.shape[0] == recs[1].states.shape[0]
