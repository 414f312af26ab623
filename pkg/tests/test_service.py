import json
import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from modeswitch.analysis import collect_rollouts
from modeswitch.cli import main
from modeswitch.dataset import load_dataset, write_dataset
from modeswitch.lander import EnvConfig
from modeswitch.policy import PolicyNet
from modeswitch.service import create_app


@pytest.fixture(scope="module")
def service_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    policy = PolicyNet.random(np.random.default_rng(8), 8, 8, "mish")
    records = collect_rollouts(policy, EnvConfig(), 5, seed=13)
    write_dataset(records, root / "data", EnvConfig(), policy)
    assert main(["embed", "--dataset", str(root / "data"),
                 "--iters", "40", "--seed", "0"]) == 0
    return root / "data"


@pytest.fixture(scope="module")
def client(service_dir):
    return TestClient(create_app(service_dir, workers=1))


def wait_for(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    seen = []
    while time.time() < deadline:
        doc = client.get(f"/jobs/{job_id}").json()
        if not seen or doc["status"] != seen[-1]:
            seen.append(doc["status"])
        if doc["status"] in ("done", "failed"):
            return doc, seen
        time.sleep(0.02)
    raise TimeoutError(f"job {job_id} did not finish; saw {seen}")


class TestReadEndpoints:
    def test_episode_index(self, client):
        doc = client.get("/episodes").json()
        assert len(doc["episodes"]) == 5
        entry = doc["episodes"][0]
        for key in ("episode_id", "outcome", "cumulative_reward", "n_steps"):
            assert key in entry

    def test_episode_steps(self, client, service_dir):
        data = load_dataset(service_dir)
        rec = data.records[2]
        doc = client.get(f"/episodes/{rec.episode_id}").json()
        assert len(doc["steps"]) == rec.states.shape[0]
        assert doc["steps"][-1]["action"] is None
        assert doc["steps"][0]["reward"] == rec.rewards[0]

    def test_latents_on_request(self, client, service_dir):
        data = load_dataset(service_dir)
        rec = data.records[0]
        doc = client.get(f"/episodes/{rec.episode_id}",
                         params={"include_latents": "true"}).json()
        assert len(doc["steps"][0]["latent"]) == rec.latent_dim

    def test_unknown_episode_404(self, client):
        assert client.get("/episodes/zzz").status_code == 404

    def test_embedding_points(self, client, service_dir):
        doc = client.get("/embedding").json()
        data = load_dataset(service_dir)
        assert len(doc["points"]) == sum(r.states.shape[0]
                                         for r in data.records)
        point = doc["points"][0]
        for key in ("point_id", "episode_id", "step", "y1", "y2", "outcome"):
            assert key in point

    def test_embedding_missing_404(self, tmp_path):
        policy = PolicyNet.random(np.random.default_rng(1), 8, 8, "mish")
        records = collect_rollouts(policy, EnvConfig(), 2, seed=1)
        write_dataset(records, tmp_path / "d", EnvConfig(), policy)
        bare = TestClient(create_app(tmp_path / "d"))
        assert bare.get("/embedding").status_code == 404

    def test_reloading_gives_409(self, client):
        store = client.app.state.store
        store.reloading = True
        try:
            assert client.get("/episodes").status_code == 409
            assert client.get("/embedding").status_code == 409
        finally:
            store.reloading = False


class TestValidation:
    def test_malformed_body_400(self, client):
        r = client.post("/plan", json={"source": {"episode": "000000"}})
        assert r.status_code == 400

    def test_unknown_source_404(self, client):
        r = client.post("/plan", json={
            "source": {"episode": "zzz", "step": 0},
            "goal": {"episode": "000000", "step": 0},
        })
        assert r.status_code == 404

    def test_goal_latent_dimension_mismatch_400(self, client):
        r = client.post("/plan", json={
            "source": {"episode": "000000", "step": 0},
            "goal_latent": [0.0, 1.0],
        })
        assert r.status_code == 400
        assert "DimensionMismatch" in r.json()["detail"]

    def test_goal_required_400(self, client):
        r = client.post("/plan", json={
            "source": {"episode": "000000", "step": 0},
        })
        assert r.status_code == 400

    def test_experiment_requires_point_goal(self, client, service_dir):
        data = load_dataset(service_dir)
        width = data.policy.hidden_width
        r = client.post("/experiment", json={
            "source": {"episode": "000000", "step": 0},
            "goal_latent": [0.0] * width,
        })
        assert r.status_code == 400


class TestJobs:
    def test_plan_job_lifecycle(self, client, service_dir):
        r = client.post("/plan", json={
            "source": {"episode": "000000", "step": 1},
            "goal": {"episode": "000001", "step": 2},
            "horizon": 3, "max_iters": 25, "restarts": 2,
        })
        assert r.status_code == 200
        handle = r.json()
        assert handle["status"] == "queued" and handle["result"] is None
        doc, seen = wait_for(client, handle["job_id"])
        assert doc["status"] == "done"
        assert seen == [s for s in ("queued", "running", "done") if s in seen]
        assert seen[-1] == "done" and seen[0] in ("queued", "running", "done")
        assert doc["progress"] == 1.0
        assert len(doc["result"]["actions"]) == 3
        # durable result file, written before the job flips to done
        path = Path(doc["result_location"])
        assert path.exists()
        assert json.loads(path.read_text())["actions"] == doc["result"]["actions"]

    def test_concurrent_reads_during_job(self, client):
        r = client.post("/plan", json={
            "source": {"episode": "000002", "step": 1},
            "goal": {"episode": "000001", "step": 2},
            "horizon": 4, "max_iters": 60, "restarts": 3,
        })
        job_id = r.json()["job_id"]
        status = "queued"
        while status not in ("done", "failed"):
            assert client.get("/episodes").status_code == 200
            status = client.get(f"/jobs/{job_id}").json()["status"]
        assert status == "done"

    def test_experiment_job(self, client):
        r = client.post("/experiment", json={
            "source": {"episode": "000000", "step": 1},
            "goal": {"episode": "000001", "step": 2},
            "horizon": 2, "max_iters": 20, "restarts": 1,
        })
        doc, _ = wait_for(client, r.json()["job_id"])
        assert doc["status"] == "done"
        result = doc["result"]
        assert "baseline_return" in result and "flip" in result
        assert result["switched_trace"] is not None
        # embedding overlay is computed server-side, one row per switched step
        assert result["switched_overlay"] is not None
        assert len(result["switched_overlay"]) == len(result["switched_states"])
        report_dir = Path(doc["result_location"])
        assert (report_dir / "summary.json").exists()
        assert (report_dir / "embedding_overlay.csv").exists()

    def test_unknown_job_404(self, client):
        assert client.get("/jobs/job-9999").status_code == 404

    def test_bad_step_fails_job_not_server(self, client):
        r = client.post("/plan", json={
            "source": {"episode": "000000", "step": 10_000},
            "goal": {"episode": "000001", "step": 2},
            "horizon": 2,
        })
        assert r.status_code == 200
        doc, _ = wait_for(client, r.json()["job_id"])
        assert doc["status"] == "failed"
        assert "out of range" in doc["error"]
