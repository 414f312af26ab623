import type {
  EmbeddingResponse, EpisodeDetail, EpisodesResponse, ExperimentResult,
  JobHandle,
} from "../src/types";
import { EMBEDDING, EPISODES, EPISODE_DETAILS, EXPERIMENT_RESULT } from "./fixtures";

export interface RecordedRequest {
  method: string;
  path: string;
  body: unknown;
}

export interface MockServerOptions {
  embedding?: EmbeddingResponse;
  episodes?: EpisodesResponse;
  details?: Record<string, EpisodeDetail>;
  experimentResult?: ExperimentResult;
  /** Job statuses to serve before the terminal one. */
  jobPhases?: Array<JobHandle["status"]>;
  failJobs?: boolean;
  failError?: string;
  embeddingStatus?: number;
}

/**
 * A fetch-compatible stub serving recorded fixture responses, so every view
 * can render without a live backend. Records all traffic for assertions.
 */
export class MockServer {
  requests: RecordedRequest[] = [];
  private jobPolls = new Map<string, number>();
  private jobCounter = 0;
  private opts: Required<Pick<MockServerOptions,
    "embedding" | "episodes" | "details" | "experimentResult" | "jobPhases">> &
    MockServerOptions;

  constructor(options: MockServerOptions = {}) {
    this.opts = {
      embedding: options.embedding ?? EMBEDDING,
      episodes: options.episodes ?? EPISODES,
      details: options.details ?? EPISODE_DETAILS,
      experimentResult: options.experimentResult ?? EXPERIMENT_RESULT,
      jobPhases: options.jobPhases ?? ["queued", "running"],
      ...options,
    };
  }

  fetch = async (input: string | URL | Request, init?: RequestInit):
      Promise<Response> => {
    const url = typeof input === "string" ? input : input.toString();
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : null;
    this.requests.push({ method, path, body });

    if (method === "GET" && path === "/embedding") {
      if (this.opts.embeddingStatus && this.opts.embeddingStatus !== 200) {
        return json({ detail: "no embedding" }, this.opts.embeddingStatus);
      }
      return json(this.opts.embedding);
    }
    if (method === "GET" && path === "/episodes") {
      return json(this.opts.episodes);
    }
    const episodeMatch = path.match(/^\/episodes\/([^/?]+)/);
    if (method === "GET" && episodeMatch) {
      const detail = this.opts.details[decodeURIComponent(episodeMatch[1])];
      return detail ? json(detail)
                    : json({ detail: "unknown episode" }, 404);
    }
    if (method === "POST" && (path === "/experiment" || path === "/plan")) {
      this.jobCounter += 1;
      const jobId = `job-${String(this.jobCounter).padStart(4, "0")}`;
      this.jobPolls.set(jobId, 0);
      return json(this.handle(jobId, "queued"));
    }
    const jobMatch = path.match(/^\/jobs\/([^/?]+)/);
    if (method === "GET" && jobMatch) {
      const jobId = decodeURIComponent(jobMatch[1]);
      if (!this.jobPolls.has(jobId)) {
        return json({ detail: "unknown job" }, 404);
      }
      const polls = this.jobPolls.get(jobId)!;
      this.jobPolls.set(jobId, polls + 1);
      const phases = this.opts.jobPhases;
      if (polls < phases.length) {
        return json(this.handle(jobId, phases[polls],
                                polls / (phases.length + 1)));
      }
      if (this.opts.failJobs) {
        return json({
          ...this.handle(jobId, "failed", 1),
          error: this.opts.failError ?? "AllRestartsFailed: every restart hit "
            + "non-finite rollouts",
        });
      }
      return json({
        ...this.handle(jobId, "done", 1),
        result: this.opts.experimentResult,
        result_location: `/tmp/jobs/${jobId}/report`,
      });
    }
    return json({ detail: `no route for ${method} ${path}` }, 404);
  };

  private handle(jobId: string, status: JobHandle["status"],
                 progress = 0): JobHandle {
    return {
      job_id: jobId, kind: "experiment", status, progress,
      result: null, error: null, result_location: null,
    };
  }

  experimentRequests(): RecordedRequest[] {
    return this.requests.filter(
      (r) => r.method === "POST" && r.path === "/experiment");
  }
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
