/** Payload types for the mode-switching service API (version 1). */

export interface EmbeddingPoint {
  point_id: number;
  episode_id: string;
  step: number;
  y1: number;
  y2: number;
  outcome: string;
}

export interface EmbeddingResponse {
  version: number;
  points: EmbeddingPoint[];
}

export interface EpisodeSummary {
  episode_id: string;
  seed: number | null;
  outcome: string;
  cumulative_reward: number;
  n_steps: number;
  event: string;
}

export interface EpisodesResponse {
  version: number;
  episodes: EpisodeSummary[];
}

export interface EpisodeStep {
  step: number;
  state: number[];
  legs: number[];
  observation: number[];
  action: number[] | null;
  reward: number | null;
  event: string;
  latent?: number[];
}

export interface EpisodeDetail {
  version: number;
  episode_id: string;
  outcome: string;
  cumulative_reward: number;
  steps: EpisodeStep[];
}

export interface PointRef {
  episode: string;
  step: number;
}

export interface ExperimentRequest {
  source: PointRef;
  goal: PointRef;
  horizon: number;
  seed?: number;
}

export interface ExperimentResult {
  version: number;
  spec: unknown;
  baseline_return: number;
  baseline_outcome: string;
  switched_return: number | null;
  switched_outcome: string | null;
  flip: boolean;
  plan_error: string | null;
  baseline_trace: number[];
  switched_trace: number[] | null;
  planned_actions: number[][] | null;
  baseline_actions: number[][];
  switched_actions: number[][] | null;
  baseline_states: number[][];
  switched_states: number[][] | null;
  switched_overlay: number[][] | null;
}

export interface JobHandle {
  job_id: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  progress: number;
  result: ExperimentResult | null;
  error: string | null;
  result_location: string | null;
}
