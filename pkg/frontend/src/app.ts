import { ApiClient } from "./api";
import { ResultView, type CtxFactory } from "./resultView";
import { EmbeddingScatter, type Ctx2D } from "./scatter";
import { SelectionState, type Selected } from "./selection";
import type { EmbeddingPoint, EpisodeStep, JobHandle } from "./types";

export interface AppOptions {
  baseUrl: string;
  fetchFn?: typeof fetch;
  ctxFactory?: CtxFactory;
  pollIntervalMs?: number;
  scatterWidth?: number;
  scatterHeight?: number;
}

const STATE_LABELS = ["x", "y", "vx", "vy", "angle", "ang.vel"];

function defaultCtxFactory(canvas: HTMLCanvasElement): Ctx2D | null {
  return canvas.getContext("2d") as unknown as Ctx2D | null;
}

function fmtState(state: number[]): string {
  return state
    .map((v, i) => `${STATE_LABELS[i] ?? `s${i}`}=${v.toFixed(3)}`)
    .join("  ");
}

/**
 * The explorer: embedding scatter on the left, selection/launch panel on the
 * right, experiment results below. All numeric content is fetched from the
 * service; this module only routes and renders it.
 */
export class ModeExplorerApp {
  api: ApiClient;
  scatter!: EmbeddingScatter;
  selection = new SelectionState();
  resultView!: ResultView;

  private doc: Document;
  private ctxFactory: CtxFactory;
  private status!: HTMLElement;
  private hoverBox!: HTMLElement;
  private detailBox!: HTMLElement;
  private warningsBox!: HTMLElement;
  private launchButton!: HTMLButtonElement;
  private clearButton!: HTMLButtonElement;
  private trajectoryButton!: HTMLButtonElement;
  private horizonInput!: HTMLInputElement;
  private canvas!: HTMLCanvasElement;
  private emptyMessage!: HTMLElement;
  private monitor!: HTMLElement;
  private shownTrajectory: string | null = null;

  constructor(private root: HTMLElement, private opts: AppOptions) {
    this.doc = root.ownerDocument;
    this.api = new ApiClient(opts.baseUrl, opts.fetchFn);
    this.ctxFactory = opts.ctxFactory ?? defaultCtxFactory;
  }

  async init(): Promise<void> {
    this.buildLayout();
    let points: EmbeddingPoint[];
    try {
      points = (await this.api.getEmbedding()).points;
    } catch (err) {
      this.status.setAttribute("data-role", "fetch-error");
      this.status.textContent =
        `could not load embedding: ${(err as Error).message}`;
      const retry = this.doc.createElement("button");
      retry.textContent = "retry";
      retry.addEventListener("click", () => void this.init());
      this.status.appendChild(retry);
      return;
    }
    this.scatter.setPoints(points);
    if (points.length === 0) {
      this.emptyMessage.textContent =
        "dataset has no embedded points yet; run the embed step";
      this.emptyMessage.hidden = false;
    } else {
      this.emptyMessage.hidden = true;
    }
    this.scatter.render();
    this.status.textContent = `${points.length} latent points loaded`;
  }

  private buildLayout(): void {
    const doc = this.doc;
    this.root.textContent = "";

    const main = doc.createElement("div");
    main.className = "explorer-main";
    this.root.appendChild(main);

    const left = doc.createElement("div");
    left.className = "embedding-panel";
    main.appendChild(left);

    this.canvas = doc.createElement("canvas");
    this.canvas.width = this.opts.scatterWidth ?? 800;
    this.canvas.height = this.opts.scatterHeight ?? 600;
    this.canvas.setAttribute("data-role", "embedding-canvas");
    left.appendChild(this.canvas);

    const caption = doc.createElement("div");
    caption.className = "embedding-caption";
    caption.textContent =
      "embedding coordinates are structural, not metric: only neighborhood " +
      "relations carry meaning, the axes have no units";
    left.appendChild(caption);

    this.emptyMessage = doc.createElement("div");
    this.emptyMessage.setAttribute("data-role", "empty-message");
    this.emptyMessage.hidden = true;
    left.appendChild(this.emptyMessage);

    const side = doc.createElement("div");
    side.className = "selection-panel";
    main.appendChild(side);

    this.status = doc.createElement("div");
    this.status.setAttribute("data-role", "status");
    side.appendChild(this.status);

    this.detailBox = doc.createElement("div");
    this.detailBox.setAttribute("data-role", "selection-details");
    side.appendChild(this.detailBox);

    this.warningsBox = doc.createElement("div");
    this.warningsBox.setAttribute("data-role", "selection-warnings");
    side.appendChild(this.warningsBox);

    const horizonLabel = doc.createElement("label");
    horizonLabel.textContent = "horizon ";
    this.horizonInput = doc.createElement("input");
    this.horizonInput.type = "number";
    this.horizonInput.value = String(this.selection.horizon);
    this.horizonInput.setAttribute("data-role", "horizon");
    this.horizonInput.addEventListener("change", () => {
      this.selection.horizon = Number(this.horizonInput.value) || 0;
    });
    horizonLabel.appendChild(this.horizonInput);
    side.appendChild(horizonLabel);

    this.launchButton = doc.createElement("button");
    this.launchButton.textContent = "plan and switch";
    this.launchButton.disabled = true;
    this.launchButton.setAttribute("data-role", "launch");
    this.launchButton.addEventListener("click", () => void this.launch());
    side.appendChild(this.launchButton);

    this.clearButton = doc.createElement("button");
    this.clearButton.textContent = "clear selection";
    this.clearButton.setAttribute("data-role", "clear");
    this.clearButton.addEventListener("click", () => this.clearSelection());
    side.appendChild(this.clearButton);

    this.trajectoryButton = doc.createElement("button");
    this.trajectoryButton.textContent = "trace episode";
    this.trajectoryButton.disabled = true;
    this.trajectoryButton.setAttribute("data-role", "trace-episode");
    this.trajectoryButton.addEventListener("click", () => this.toggleTrajectory());
    side.appendChild(this.trajectoryButton);

    this.monitor = doc.createElement("div");
    this.monitor.setAttribute("data-role", "job-monitor");
    side.appendChild(this.monitor);

    const results = doc.createElement("div");
    results.className = "result-panel";
    results.setAttribute("data-role", "result-panel");
    this.root.appendChild(results);
    this.resultView = new ResultView(results, this.ctxFactory);

    const ctx = this.ctxFactory(this.canvas) ?? nullCtx();
    this.scatter = new EmbeddingScatter(ctx, this.canvas.width,
                                        this.canvas.height);

    this.hoverBox = doc.createElement("div");
    this.hoverBox.className = "hover-box";
    this.hoverBox.setAttribute("data-role", "hover-info");
    left.appendChild(this.hoverBox);

    const local = (ev: MouseEvent): [number, number] => {
      const rect = this.canvas.getBoundingClientRect?.() ??
        ({ left: 0, top: 0 } as DOMRect);
      return [ev.clientX - rect.left, ev.clientY - rect.top];
    };

    let dragging = false;
    let moved = false;
    let last: [number, number] = [0, 0];
    this.canvas.addEventListener("mousedown", (ev) => {
      dragging = true;
      moved = false;
      last = local(ev as MouseEvent);
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      const [px, py] = local(ev as MouseEvent);
      if (dragging) {
        const dx = px - last[0];
        const dy = py - last[1];
        if (Math.abs(dx) + Math.abs(dy) > 2) moved = true;
        this.scatter.panBy(dx, dy);
        last = [px, py];
        this.scatter.render();
      } else {
        void this.handleHover(px, py);
      }
    });
    this.canvas.addEventListener("mouseup", (ev) => {
      dragging = false;
      if (!moved) {
        const [px, py] = local(ev as MouseEvent);
        this.handlePick(px, py);
      }
    });
    this.canvas.addEventListener("mouseleave", () => {
      dragging = false;
      this.hoverBox.textContent = "";
    });
    this.canvas.addEventListener("wheel", (ev) => {
      const [px, py] = local(ev as WheelEvent);
      const factor = (ev as WheelEvent).deltaY < 0 ? 1.15 : 1 / 1.15;
      this.scatter.zoomAt(px, py, factor);
      this.scatter.render();
      ev.preventDefault?.();
    });
  }

  /** Hover reveals episode/step/outcome and the logged state. */
  async handleHover(px: number, py: number): Promise<void> {
    const point = this.scatter.pickAt(px, py);
    if (!point) {
      this.hoverBox.textContent = "";
      return;
    }
    let stateText = "";
    try {
      const detail = await this.api.getEpisode(point.episode_id);
      const step = detail.steps[point.step];
      if (step) stateText = `  ${fmtState(step.state)}`;
    } catch {
      stateText = "";
    }
    this.hoverBox.textContent =
      `episode ${point.episode_id} step ${point.step} ` +
      `[${point.outcome}]${stateText}`;
  }

  /** Click handling: snap to the nearest point within the pick radius. */
  handlePick(px: number, py: number): Selected | null {
    const point = this.scatter.pickAt(px, py);
    if (!point) return null;
    const role = this.selection.pick(point);
    this.scatter.setMarker(role, point);
    this.scatter.render();
    void this.refreshSelectionPanel();
    return role === "source" ? this.selection.source : this.selection.goal;
  }

  clearSelection(): void {
    this.selection.clear();
    this.scatter.setMarker("source", null);
    this.scatter.setMarker("goal", null);
    this.scatter.setOverlay(null);
    this.scatter.render();
    void this.refreshSelectionPanel();
  }

  toggleTrajectory(): void {
    const episode = this.selection.source?.episode ?? null;
    this.shownTrajectory =
      this.shownTrajectory === episode ? null : episode;
    this.scatter.setTrajectory(this.shownTrajectory);
    this.scatter.render();
  }

  async refreshSelectionPanel(): Promise<void> {
    this.launchButton.disabled = !this.selection.canLaunch();
    this.trajectoryButton.disabled = this.selection.source === null;
    this.warningsBox.textContent = this.selection.warnings().join("; ");
    const parts: string[] = [];
    for (const [label, sel] of [
      ["source", this.selection.source],
      ["goal", this.selection.goal],
    ] as const) {
      if (!sel) continue;
      let stateText = "";
      try {
        const detail = await this.api.getEpisode(sel.episode);
        const step: EpisodeStep | undefined = detail.steps[sel.step];
        if (step) stateText = ` ${fmtState(step.state)}`;
      } catch {
        stateText = " (state unavailable)";
      }
      parts.push(
        `${label}: episode ${sel.episode} step ${sel.step} ` +
          `[${sel.outcome}]${stateText}`,
      );
    }
    this.detailBox.textContent = parts.join("\n");
  }

  async launch(): Promise<JobHandle | null> {
    if (!this.selection.canLaunch()) return null;
    const body = this.selection.requestBody();
    this.monitor.textContent = "submitting experiment";
    let handle: JobHandle;
    try {
      handle = await this.api.postExperiment(body);
    } catch (err) {
      this.monitor.textContent = `submit failed: ${(err as Error).message}`;
      return null;
    }
    // a new launch replaces whatever job the monitor was watching
    this.selection.activeJobId = handle.job_id;
    this.monitor.textContent = `job ${handle.job_id}: ${handle.status}`;
    try {
      const done = await this.api.pollJob(handle.job_id, {
        intervalMs: this.opts.pollIntervalMs ?? 250,
        onUpdate: (job) => {
          if (this.selection.activeJobId !== handle.job_id) return;
          this.monitor.textContent =
            `job ${job.job_id}: ${job.status} (${Math.round(job.progress * 100)}%)`;
        },
      });
      if (this.selection.activeJobId !== handle.job_id) return done;
      if (done.result) {
        this.resultView.render(done.result);
        if (done.result.switched_overlay) {
          this.scatter.setOverlay(done.result.switched_overlay);
          this.scatter.render();
        }
      }
      return done;
    } catch (err) {
      if (this.selection.activeJobId === handle.job_id) {
        this.monitor.textContent = `job failed: ${(err as Error).message}`;
        this.resultView.renderFailure((err as Error).message);
      }
      return null;
    }
  }
}

function nullCtx(): Ctx2D {
  const noop = () => undefined;
  return {
    fillStyle: "", strokeStyle: "", lineWidth: 1, globalAlpha: 1,
    clearRect: noop, fillRect: noop, beginPath: noop, moveTo: noop,
    lineTo: noop, arc: noop, stroke: noop, fill: noop,
  };
}

export function mount(root: HTMLElement, opts: AppOptions): ModeExplorerApp {
  const app = new ModeExplorerApp(root, opts);
  void app.init();
  return app;
}
