import type {
  EmbeddingResponse, EpisodeDetail, EpisodesResponse, ExperimentRequest,
  JobHandle,
} from "./types";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (job: JobHandle) => void;
}

/**
 * Thin client over the HTTP service. All numbers shown in the UI originate
 * from responses of this client; the UI itself never computes them.
 */
export class ApiClient {
  private episodeCache = new Map<string, EpisodeDetail>();

  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = globalThis.fetch?.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && body.detail) detail = JSON.stringify(body.detail);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return resp.json() as Promise<T>;
  }

  getEmbedding(): Promise<EmbeddingResponse> {
    return this.request<EmbeddingResponse>("/embedding");
  }

  getEpisodes(): Promise<EpisodesResponse> {
    return this.request<EpisodesResponse>("/episodes");
  }

  async getEpisode(episodeId: string): Promise<EpisodeDetail> {
    const cached = this.episodeCache.get(episodeId);
    if (cached) return cached;
    const detail = await this.request<EpisodeDetail>(
      `/episodes/${encodeURIComponent(episodeId)}`,
    );
    this.episodeCache.set(episodeId, detail);
    return detail;
  }

  postExperiment(req: ExperimentRequest): Promise<JobHandle> {
    return this.request<JobHandle>("/experiment", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  getJob(jobId: string): Promise<JobHandle> {
    return this.request<JobHandle>(`/jobs/${encodeURIComponent(jobId)}`);
  }

  /** Poll a job until done/failed; resolves with the terminal handle. */
  pollJob(jobId: string, opts: PollOptions = {}): Promise<JobHandle> {
    const interval = opts.intervalMs ?? 250;
    const deadline = Date.now() + (opts.timeoutMs ?? 300_000);
    return new Promise((resolve, reject) => {
      const tick = async () => {
        let job: JobHandle;
        try {
          job = await this.getJob(jobId);
        } catch (err) {
          reject(err);
          return;
        }
        opts.onUpdate?.(job);
        if (job.status === "done") {
          resolve(job);
        } else if (job.status === "failed") {
          reject(new Error(job.error ?? "job failed"));
        } else if (Date.now() > deadline) {
          reject(new Error(`job ${jobId} timed out`));
        } else {
          setTimeout(tick, interval);
        }
      };
      void tick();
    });
  }
}
