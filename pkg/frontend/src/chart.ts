import type { Ctx2D } from "./scatter";

export interface Series {
  label: string;
  color: string;
  values: number[];
  /** Draw a vertical rule after this many samples (planned-segment end). */
  markAt?: number;
}

/** Minimal polyline chart for traces; axes autoscale to the data. */
export class LineChart {
  constructor(
    private ctx: Ctx2D,
    private width: number,
    private height: number,
    private margin = 6,
  ) {}

  draw(series: Series[]): void {
    const { ctx } = this;
    ctx.clearRect(0, 0, this.width, this.height);
    const all = series.flatMap((s) => s.values);
    if (all.length === 0) return;
    let lo = Math.min(...all);
    let hi = Math.max(...all);
    if (hi - lo < 1e-12) {
      hi = lo + 1;
    }
    const n = Math.max(...series.map((s) => s.values.length));
    const plotW = this.width - 2 * this.margin;
    const plotH = this.height - 2 * this.margin;
    const sx = (i: number) => this.margin + (n > 1 ? (i / (n - 1)) * plotW : 0);
    const sy = (v: number) =>
      this.margin + plotH - ((v - lo) / (hi - lo)) * plotH;

    // zero line for orientation when the range crosses zero
    if (lo < 0 && hi > 0) {
      ctx.strokeStyle = "#cccccc";
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(this.margin, sy(0));
      ctx.lineTo(this.width - this.margin, sy(0));
      ctx.stroke();
    }

    for (const s of series) {
      if (s.values.length === 0) continue;
      ctx.strokeStyle = s.color;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(sx(0), sy(s.values[0]));
      for (let i = 1; i < s.values.length; i++) {
        ctx.lineTo(sx(i), sy(s.values[i]));
      }
      ctx.stroke();
      if (s.markAt !== undefined && s.markAt > 0 && s.markAt < s.values.length) {
        ctx.strokeStyle = "#999999";
        ctx.lineWidth = 1;
        ctx.beginPath();
        ctx.moveTo(sx(s.markAt), this.margin);
        ctx.lineTo(sx(s.markAt), this.height - this.margin);
        ctx.stroke();
      }
    }
  }
}
