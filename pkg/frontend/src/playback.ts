import type { Ctx2D } from "./scatter";

/**
 * Replays a logged state trajectory on a 2D canvas: ground line, pad mark,
 * and the lander body drawn at its logged position and attitude. Reads only
 * recorded states; it computes nothing about the motion itself.
 */
export class PlaybackView {
  private frame = 0;
  private states: number[][] = [];

  constructor(
    private ctx: Ctx2D,
    private width: number,
    private height: number,
    private worldHalfWidth = 1.6,
    private worldHeight = 2.0,
  ) {}

  setStates(states: number[][]): void {
    this.states = states;
    this.frame = 0;
  }

  get frameCount(): number {
    return this.states.length;
  }

  get currentFrame(): number {
    return this.frame;
  }

  seek(frame: number): void {
    if (this.states.length === 0) {
      this.frame = 0;
      return;
    }
    this.frame = Math.min(Math.max(frame, 0), this.states.length - 1);
    this.render();
  }

  stepForward(): void {
    this.seek(this.frame + 1);
  }

  private toScreen(x: number, y: number): [number, number] {
    const sx = ((x + this.worldHalfWidth) / (2 * this.worldHalfWidth)) * this.width;
    const sy = this.height - (y / this.worldHeight) * this.height * 0.9 -
      0.05 * this.height;
    return [sx, sy];
  }

  render(): void {
    const { ctx } = this;
    ctx.clearRect(0, 0, this.width, this.height);

    // ground and pad
    const [, groundY] = this.toScreen(0, 0);
    ctx.strokeStyle = "#555555";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(0, groundY);
    ctx.lineTo(this.width, groundY);
    ctx.stroke();
    const [padL] = this.toScreen(-0.2, 0);
    const [padR] = this.toScreen(0.2, 0);
    ctx.fillStyle = "#c9a227";
    ctx.fillRect(padL, groundY - 2, padR - padL, 4);

    if (this.states.length === 0) return;
    const s = this.states[this.frame];
    const [cx, cy] = this.toScreen(s[0], s[1]);
    const angle = s[4];
    const size = 10;
    const cos = Math.cos(angle);
    const sin = Math.sin(angle);
    const local: Array<[number, number]> = [
      [0, -size], [size * 0.7, size * 0.8], [-size * 0.7, size * 0.8],
    ];
    ctx.fillStyle = "#30405a";
    ctx.beginPath();
    local.forEach(([lx, ly], i) => {
      // rotate the body by the logged attitude (screen y grows downward)
      const px = cx + lx * cos - ly * sin;
      const py = cy + lx * sin + ly * cos;
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.fill();

    // faint breadcrumb trail of where the lander has been
    ctx.fillStyle = "#aab4c4";
    for (let i = 0; i < this.frame; i += 2) {
      const [tx, ty] = this.toScreen(this.states[i][0], this.states[i][1]);
      ctx.fillRect(tx, ty, 1.5, 1.5);
    }
  }
}
