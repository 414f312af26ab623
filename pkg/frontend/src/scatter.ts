import type { EmbeddingPoint } from "./types";

/**
 * The slice of CanvasRenderingContext2D the scatter actually uses. Tests
 * inject a stub implementation; the browser passes the real context.
 */
export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
}

export const OUTCOME_COLORS: Record<string, string> = {
  // successful episodes orange, unsuccessful blue; other failure classes
  // get their own hues but stay in the "cool" family
  solved: "#e8883a",
  crashed: "#3a6fe8",
  timeout: "#3ab5b0",
  out_of_bounds: "#8a5fd4",
};

const MARKER_FILL: Record<"source" | "goal", string> = {
  source: "#3a6fe8",
  goal: "#e8883a",
};

interface View {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/**
 * Canvas scatter of embedding points colored by episode outcome, with
 * pan/zoom, nearest-point picking, per-episode trajectory polylines, and
 * source/goal markers. Points are kept in flat arrays grouped by color
 * class so a 20k-point frame is two passes over typed arrays.
 */
export class EmbeddingScatter {
  private points: EmbeddingPoint[] = [];
  private xs = new Float64Array(0);
  private ys = new Float64Array(0);
  private classOrder: number[][] = [];
  private classColors: string[] = [];
  private view: View = { scale: 1, offsetX: 0, offsetY: 0 };
  private markers: { source: EmbeddingPoint | null; goal: EmbeddingPoint | null } =
    { source: null, goal: null };
  private trajectory: number[] | null = null;
  private overlay: Array<[number, number]> | null = null;
  lastRenderMs = 0;

  constructor(
    private ctx: Ctx2D,
    private width: number,
    private height: number,
    private pointSize = 2,
  ) {}

  get pointCount(): number {
    return this.points.length;
  }

  setPoints(points: EmbeddingPoint[]): void {
    this.points = points;
    this.xs = new Float64Array(points.length);
    this.ys = new Float64Array(points.length);
    const byColor = new Map<string, number[]>();
    points.forEach((p, i) => {
      this.xs[i] = p.y1;
      this.ys[i] = p.y2;
      const color = OUTCOME_COLORS[p.outcome] ?? "#888888";
      let bucket = byColor.get(color);
      if (!bucket) {
        bucket = [];
        byColor.set(color, bucket);
      }
      bucket.push(i);
    });
    this.classColors = [...byColor.keys()];
    this.classOrder = this.classColors.map((c) => byColor.get(c)!);
    this.fitView();
  }

  /** Reset pan/zoom so all points fit with a margin. */
  fitView(): void {
    if (this.points.length === 0) {
      this.view = { scale: 1, offsetX: this.width / 2, offsetY: this.height / 2 };
      return;
    }
    let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
    for (let i = 0; i < this.xs.length; i++) {
      if (this.xs[i] < minX) minX = this.xs[i];
      if (this.xs[i] > maxX) maxX = this.xs[i];
      if (this.ys[i] < minY) minY = this.ys[i];
      if (this.ys[i] > maxY) maxY = this.ys[i];
    }
    const spanX = Math.max(maxX - minX, 1e-9);
    const spanY = Math.max(maxY - minY, 1e-9);
    const scale = 0.9 * Math.min(this.width / spanX, this.height / spanY);
    this.view = {
      scale,
      offsetX: this.width / 2 - scale * (minX + maxX) / 2,
      // canvas y grows downward; flip so the embedding keeps its orientation
      offsetY: this.height / 2 + scale * (minY + maxY) / 2,
    };
  }

  toScreen(x: number, y: number): [number, number] {
    return [
      x * this.view.scale + this.view.offsetX,
      -y * this.view.scale + this.view.offsetY,
    ];
  }

  panBy(dxPixels: number, dyPixels: number): void {
    this.view.offsetX += dxPixels;
    this.view.offsetY += dyPixels;
  }

  zoomAt(px: number, py: number, factor: number): void {
    const clamped = Math.min(Math.max(factor, 0.05), 20);
    this.view.offsetX = px + (this.view.offsetX - px) * clamped;
    this.view.offsetY = py + (this.view.offsetY - py) * clamped;
    this.view.scale *= clamped;
  }

  /** Nearest point within pickRadius pixels of the cursor, else null. */
  pickAt(px: number, py: number, pickRadius = 8): EmbeddingPoint | null {
    let best = -1;
    let bestD2 = pickRadius * pickRadius;
    for (let i = 0; i < this.xs.length; i++) {
      const sx = this.xs[i] * this.view.scale + this.view.offsetX;
      const sy = -this.ys[i] * this.view.scale + this.view.offsetY;
      const d2 = (sx - px) * (sx - px) + (sy - py) * (sy - py);
      if (d2 <= bestD2) {
        bestD2 = d2;
        best = i;
      }
    }
    return best >= 0 ? this.points[best] : null;
  }

  setMarker(kind: "source" | "goal", point: EmbeddingPoint | null): void {
    this.markers[kind] = point;
  }

  /** Highlight one episode's temporal ordering as a polyline. */
  setTrajectory(episodeId: string | null): void {
    if (episodeId === null) {
      this.trajectory = null;
      return;
    }
    const idx = this.points
      .map((p, i) => ({ p, i }))
      .filter(({ p }) => p.episode_id === episodeId)
      .sort((a, b) => a.p.step - b.p.step)
      .map(({ i }) => i);
    this.trajectory = idx.length ? idx : null;
  }

  /** Overlay projected coordinates of a switched trajectory. */
  setOverlay(coords: number[][] | null): void {
    this.overlay = coords ? coords.map((c) => [c[0], c[1]]) : null;
  }

  get overlayLength(): number {
    return this.overlay?.length ?? 0;
  }

  render(): void {
    const t0 = (globalThis.performance ?? Date).now();
    const { ctx } = this;
    ctx.clearRect(0, 0, this.width, this.height);
    const { scale, offsetX, offsetY } = this.view;
    const s = this.pointSize;
    const half = s / 2;
    for (let c = 0; c < this.classOrder.length; c++) {
      ctx.fillStyle = this.classColors[c];
      const idx = this.classOrder[c];
      for (let k = 0; k < idx.length; k++) {
        const i = idx[k];
        ctx.fillRect(
          this.xs[i] * scale + offsetX - half,
          -this.ys[i] * scale + offsetY - half,
          s, s,
        );
      }
    }
    if (this.trajectory && this.trajectory.length > 1) {
      ctx.strokeStyle = "#222222";
      ctx.lineWidth = 1;
      ctx.beginPath();
      const first = this.trajectory[0];
      ctx.moveTo(this.xs[first] * scale + offsetX,
                 -this.ys[first] * scale + offsetY);
      for (let k = 1; k < this.trajectory.length; k++) {
        const i = this.trajectory[k];
        ctx.lineTo(this.xs[i] * scale + offsetX,
                   -this.ys[i] * scale + offsetY);
      }
      ctx.stroke();
    }
    if (this.overlay && this.overlay.length > 1) {
      ctx.strokeStyle = "#b03030";
      ctx.lineWidth = 2;
      ctx.beginPath();
      const [x0, y0] = this.toScreen(this.overlay[0][0], this.overlay[0][1]);
      ctx.moveTo(x0, y0);
      for (let k = 1; k < this.overlay.length; k++) {
        const [x, y] = this.toScreen(this.overlay[k][0], this.overlay[k][1]);
        ctx.lineTo(x, y);
      }
      ctx.stroke();
    }
    for (const kind of ["source", "goal"] as const) {
      const marker = this.markers[kind];
      if (!marker) continue;
      const [sx, sy] = this.toScreen(marker.y1, marker.y2);
      ctx.beginPath();
      ctx.fillStyle = MARKER_FILL[kind];
      ctx.arc(sx, sy, 6, 0, 2 * Math.PI);
      ctx.fill();
      ctx.strokeStyle = "#000000";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(sx, sy, 6, 0, 2 * Math.PI);
      ctx.stroke();
    }
    this.lastRenderMs = ((globalThis.performance ?? Date).now()) - t0;
  }
}
