import { describe, expect, it } from "vitest";

import { PlaybackView } from "../src/playback";
import { EXPERIMENT_RESULT } from "./fixtures";
import { StubCtx } from "./stubCtx";

describe("PlaybackView", () => {
  it("steps through logged states and clamps at the ends", () => {
    const ctx = new StubCtx();
    const view = new PlaybackView(ctx, 240, 180);
    view.setStates(EXPERIMENT_RESULT.switched_states!);
    expect(view.frameCount).toBe(6);
    expect(view.currentFrame).toBe(0);
    view.stepForward();
    expect(view.currentFrame).toBe(1);
    view.seek(999);
    expect(view.currentFrame).toBe(5);
    view.seek(-5);
    expect(view.currentFrame).toBe(0);
  });

  it("draws the ground, pad, and lander body", () => {
    const ctx = new StubCtx();
    const view = new PlaybackView(ctx, 240, 180);
    view.setStates(EXPERIMENT_RESULT.baseline_states);
    view.render();
    expect(ctx.strokes).toBeGreaterThanOrEqual(1); // ground line
    expect(ctx.fills).toBeGreaterThanOrEqual(1);   // lander body
    expect(ctx.fillRectCount).toBeGreaterThanOrEqual(1); // pad
  });

  it("renders an empty trajectory without crashing", () => {
    const ctx = new StubCtx();
    const view = new PlaybackView(ctx, 240, 180);
    view.setStates([]);
    view.render();
    view.seek(3);
    expect(view.currentFrame).toBe(0);
  });
});
