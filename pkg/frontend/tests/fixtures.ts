import type {
  EmbeddingPoint, EmbeddingResponse, EpisodeDetail, EpisodesResponse,
  ExperimentResult,
} from "../src/types";

/** Hand-written mini dataset: one crashed and one solved episode. */

export const EMBEDDING: EmbeddingResponse = {
  version: 1,
  points: [
    { point_id: 0, episode_id: "000003", step: 0, y1: 4.0, y2: 5.0, outcome: "crashed" },
    { point_id: 1, episode_id: "000003", step: 1, y1: 4.2, y2: 4.6, outcome: "crashed" },
    { point_id: 2, episode_id: "000003", step: 2, y1: 4.4, y2: 4.1, outcome: "crashed" },
    { point_id: 3, episode_id: "000003", step: 3, y1: 4.7, y2: 3.5, outcome: "crashed" },
    { point_id: 4, episode_id: "000007", step: 0, y1: 3.8, y2: 5.2, outcome: "solved" },
    { point_id: 5, episode_id: "000007", step: 1, y1: 2.9, y2: 3.9, outcome: "solved" },
    { point_id: 6, episode_id: "000007", step: 2, y1: -1.5, y2: -2.2, outcome: "solved" },
    { point_id: 7, episode_id: "000007", step: 3, y1: -2.0, y2: -2.6, outcome: "solved" },
  ],
};

export const EPISODES: EpisodesResponse = {
  version: 1,
  episodes: [
    { episode_id: "000003", seed: 17, outcome: "crashed",
      cumulative_reward: -87.3, n_steps: 3, event: "crashed" },
    { episode_id: "000007", seed: 29, outcome: "solved",
      cumulative_reward: 263.4, n_steps: 3, event: "landed" },
  ],
};

function detail(episodeId: string, outcome: string, cumulative: number,
                states: number[][]): EpisodeDetail {
  return {
    version: 1,
    episode_id: episodeId,
    outcome,
    cumulative_reward: cumulative,
    steps: states.map((state, i) => ({
      step: i,
      state,
      legs: [0, 0],
      observation: [...state, 0, 0],
      action: i < states.length - 1 ? [0.1, -0.2] : null,
      reward: i < states.length - 1 ? -1.5 : null,
      event: i < states.length - 1 ? "none" : outcome,
    })),
  };
}

export const EPISODE_DETAILS: Record<string, EpisodeDetail> = {
  "000003": detail("000003", "crashed", -87.3, [
    [0.1, 1.31, -0.4, -0.9, 0.21, 0.05],
    [0.09, 1.28, -0.42, -1.1, 0.22, 0.06],
    [0.08, 1.24, -0.44, -1.3, 0.23, 0.07],
    [0.07, 1.19, -0.46, -1.5, 0.24, 0.08],
  ]),
  "000007": detail("000007", "solved", 263.4, [
    [-0.05, 1.29, 0.1, -0.5, -0.02, 0.0],
    [-0.04, 1.27, 0.1, -0.55, -0.02, 0.0],
    [-0.03, 1.25, 0.1, -0.6, -0.02, 0.0],
    [-0.02, 1.22, 0.1, -0.65, -0.02, 0.0],
  ]),
};

export const EXPERIMENT_RESULT: ExperimentResult = {
  version: 1,
  spec: {
    source_episode: "000003", source_step: 1,
    goal_episode: "000007", goal_step: 2, horizon: 4,
  },
  baseline_return: -87.3,
  baseline_outcome: "crashed",
  switched_return: 265.8,
  switched_outcome: "solved",
  flip: true,
  plan_error: null,
  baseline_trace: [14.2, 13.8, 13.1, 12.9],
  switched_trace: [14.2, 10.6, 6.2, 2.8, 1.4, 1.1],
  planned_actions: [[0.4, 0.9], [0.6, 1.0], [0.7, 0.8], [0.5, 0.2]],
  baseline_actions: [[-0.3, 0.1], [-0.4, 0.2], [-0.5, 0.2]],
  switched_actions: [
    [-0.2, 0.9], [0.2, 1.0], [0.4, 0.8], [0.0, 0.2], [0.3, -0.1],
  ],
  baseline_states: EPISODE_DETAILS["000003"].steps.map((s) => s.state),
  switched_states: [
    [0.09, 1.28, -0.42, -1.1, 0.22, 0.06],
    [0.09, 1.26, -0.3, -0.8, 0.2, 0.0],
    [0.1, 1.25, -0.2, -0.5, 0.15, -0.05],
    [0.1, 1.24, -0.1, -0.3, 0.1, -0.05],
    [0.11, 1.23, -0.05, -0.2, 0.05, -0.02],
    [0.11, 1.22, 0.0, -0.1, 0.02, 0.0],
  ],
  switched_overlay: [
    [4.2, 4.6], [3.6, 3.1], [2.2, 1.0], [0.4, -0.8], [-1.2, -1.9], [-1.8, -2.4],
  ],
};

/** Deterministic 20k-point cloud for the rendering budget test. */
export function bigEmbedding(n = 20_000): EmbeddingPoint[] {
  const outcomes = ["solved", "crashed", "timeout", "out_of_bounds"];
  const points: EmbeddingPoint[] = [];
  let seed = 123456789;
  const rand = () => {
    // xorshift; plenty for scattering synthetic points
    seed ^= seed << 13; seed ^= seed >>> 17; seed ^= seed << 5;
    return ((seed >>> 0) % 100000) / 100000;
  };
  for (let i = 0; i < n; i++) {
    points.push({
      point_id: i,
      episode_id: String(i % 200).padStart(6, "0"),
      step: Math.floor(i / 200),
      y1: rand() * 40 - 20,
      y2: rand() * 40 - 20,
      outcome: outcomes[i % outcomes.length],
    });
  }
  return points;
}
