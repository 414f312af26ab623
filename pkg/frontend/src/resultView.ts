import { LineChart } from "./chart";
import { PlaybackView } from "./playback";
import type { Ctx2D } from "./scatter";
import type { ExperimentResult } from "./types";

export type CtxFactory = (canvas: HTMLCanvasElement) => Ctx2D | null;

const BASE_COLOR = "#3a6fe8";
const SWITCHED_COLOR = "#e8883a";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document, tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function canvasIn(doc: Document, parent: HTMLElement, cls: string,
                  width: number, height: number): HTMLCanvasElement {
  const canvas = el(doc, "canvas", cls);
  canvas.width = width;
  canvas.height = height;
  parent.appendChild(canvas);
  return canvas;
}

/**
 * Side-by-side comparison of the baseline and switched runs: cumulative
 * rewards with a flip banner, objective-distance traces, action traces with
 * the planned segment marked, and a trajectory playback tab.
 *
 * Every displayed number comes straight from the experiment payload.
 */
export class ResultView {
  playback: { baseline: PlaybackView | null; switched: PlaybackView | null } = {
    baseline: null,
    switched: null,
  };

  constructor(
    private container: HTMLElement,
    private ctxFactory: CtxFactory,
  ) {}

  clear(): void {
    this.container.textContent = "";
    this.playback = { baseline: null, switched: null };
  }

  renderFailure(message: string): void {
    this.clear();
    const doc = this.container.ownerDocument;
    const banner = el(doc, "div", "result-error");
    banner.setAttribute("data-role", "job-error");
    banner.textContent = `experiment failed: ${message}`;
    this.container.appendChild(banner);
  }

  render(result: ExperimentResult): void {
    this.clear();
    const doc = this.container.ownerDocument;

    const header = el(doc, "div", "result-header");
    const baseline = el(doc, "span", "reward baseline");
    baseline.setAttribute("data-role", "baseline-return");
    baseline.textContent =
      `baseline: ${result.baseline_return.toFixed(1)} (${result.baseline_outcome})`;
    header.appendChild(baseline);

    if (result.switched_return !== null) {
      const switched = el(doc, "span", "reward switched");
      switched.setAttribute("data-role", "switched-return");
      switched.textContent =
        `switched: ${result.switched_return.toFixed(1)} (${result.switched_outcome})`;
      header.appendChild(switched);

      const flip = el(doc, "span",
                      result.flip ? "flip flipped" : "flip unchanged");
      flip.setAttribute("data-role", "flip-flag");
      flip.textContent = result.flip ? "OUTCOME FLIP" : "no flip";
      header.appendChild(flip);
    }
    if (result.plan_error) {
      const planError = el(doc, "div", "result-plan-error");
      planError.setAttribute("data-role", "plan-error");
      planError.textContent =
        `plan failed (baseline shown): ${result.plan_error}`;
      header.appendChild(planError);
    }
    this.container.appendChild(header);

    const plannedLen = result.planned_actions?.length ?? 0;

    const charts = el(doc, "div", "result-charts");
    this.container.appendChild(charts);

    this.drawChart(doc, charts, "objective-trace",
      "latent distance to goal", [
        { label: "baseline", color: BASE_COLOR, values: result.baseline_trace },
        ...(result.switched_trace
          ? [{
              label: "switched", color: SWITCHED_COLOR,
              values: result.switched_trace, markAt: plannedLen,
            }]
          : []),
      ]);

    const actionSeries = (rows: number[][] | null, col: number,
                          label: string, color: string) =>
      rows ? [{ label, color, values: rows.map((r) => r[col]) }] : [];
    this.drawChart(doc, charts, "action-main", "main engine command", [
      ...actionSeries(result.baseline_actions, 0, "baseline", BASE_COLOR),
      ...(result.switched_actions
        ? [{
            label: "switched", color: SWITCHED_COLOR,
            values: result.switched_actions.map((r) => r[0]),
            markAt: plannedLen,
          }]
        : []),
    ]);
    this.drawChart(doc, charts, "action-side", "side engine command", [
      ...actionSeries(result.baseline_actions, 1, "baseline", BASE_COLOR),
      ...(result.switched_actions
        ? [{
            label: "switched", color: SWITCHED_COLOR,
            values: result.switched_actions.map((r) => r[1]),
            markAt: plannedLen,
          }]
        : []),
    ]);

    const playback = el(doc, "div", "result-playback");
    playback.setAttribute("data-role", "playback");
    this.container.appendChild(playback);
    this.playback.baseline = this.makePlayback(
      doc, playback, "playback-baseline", result.baseline_states);
    if (result.switched_states) {
      this.playback.switched = this.makePlayback(
        doc, playback, "playback-switched", result.switched_states);
    }
  }

  private drawChart(doc: Document, parent: HTMLElement, role: string,
                    title: string, series: Parameters<LineChart["draw"]>[0]): void {
    const box = el(doc, "div", "chart-box");
    box.appendChild(el(doc, "div", "chart-title", title));
    const canvas = canvasIn(doc, box, `chart ${role}`, 320, 120);
    canvas.setAttribute("data-role", role);
    parent.appendChild(box);
    const ctx = this.ctxFactory(canvas);
    if (ctx) new LineChart(ctx, 320, 120).draw(series);
  }

  private makePlayback(doc: Document, parent: HTMLElement, role: string,
                       states: number[][]): PlaybackView | null {
    const canvas = canvasIn(doc, parent, `playback ${role}`, 240, 180);
    canvas.setAttribute("data-role", role);
    const ctx = this.ctxFactory(canvas);
    if (!ctx) return null;
    const view = new PlaybackView(ctx, 240, 180);
    view.setStates(states);
    view.seek(states.length - 1);
    return view;
  }
}
