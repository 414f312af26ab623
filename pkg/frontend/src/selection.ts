import type { EmbeddingPoint } from "./types";

export interface Selected {
  episode: string;
  step: number;
  outcome: string;
  point: EmbeddingPoint;
}

/**
 * Two-click selection: first pick sets the intervention source, second the
 * goal; further picks replace the goal. Launch is possible once both are
 * set; equal outcomes or a zero-distance pair only warn, they do not block.
 */
export class SelectionState {
  source: Selected | null = null;
  goal: Selected | null = null;
  horizon = 40;
  activeJobId: string | null = null;

  pick(point: EmbeddingPoint): "source" | "goal" {
    const sel: Selected = {
      episode: point.episode_id,
      step: point.step,
      outcome: point.outcome,
      point,
    };
    if (this.source === null) {
      this.source = sel;
      return "source";
    }
    this.goal = sel;
    return "goal";
  }

  clear(): void {
    this.source = null;
    this.goal = null;
    this.activeJobId = null;
  }

  canLaunch(): boolean {
    return this.source !== null && this.goal !== null;
  }

  /** Non-blocking advisory messages about the current pair. */
  warnings(): string[] {
    const out: string[] = [];
    if (!this.source || !this.goal) return out;
    if (
      this.source.episode === this.goal.episode &&
      this.source.step === this.goal.step
    ) {
      out.push("source and goal are the same point (zero distance)");
    }
    if (this.source.outcome === this.goal.outcome) {
      out.push(
        `source and goal share the outcome "${this.source.outcome}"; ` +
          "a mode flip is unlikely",
      );
    }
    return out;
  }

  requestBody() {
    if (!this.source || !this.goal) {
      throw new Error("both source and goal must be selected");
    }
    return {
      source: { episode: this.source.episode, step: this.source.step },
      goal: { episode: this.goal.episode, step: this.goal.step },
      horizon: this.horizon,
    };
  }
}
