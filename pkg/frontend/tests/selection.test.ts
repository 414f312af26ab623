import { describe, expect, it } from "vitest";

import { SelectionState } from "../src/selection";
import { EMBEDDING } from "./fixtures";

const crashed = EMBEDDING.points[1];
const crashed2 = EMBEDDING.points[2];
const solved = EMBEDDING.points[6];

describe("SelectionState", () => {
  it("assigns source first, goal second, and replaces the goal after", () => {
    const sel = new SelectionState();
    expect(sel.pick(crashed)).toBe("source");
    expect(sel.pick(solved)).toBe("goal");
    expect(sel.source?.episode).toBe("000003");
    expect(sel.goal?.episode).toBe("000007");
    const other = EMBEDDING.points[7];
    expect(sel.pick(other)).toBe("goal");
    expect(sel.goal?.step).toBe(other.step);
    expect(sel.source?.episode).toBe("000003"); // source untouched
  });

  it("enables launch only when both points are set", () => {
    const sel = new SelectionState();
    expect(sel.canLaunch()).toBe(false);
    sel.pick(crashed);
    expect(sel.canLaunch()).toBe(false);
    sel.pick(solved);
    expect(sel.canLaunch()).toBe(true);
  });

  it("warns on a zero-distance pair without blocking", () => {
    const sel = new SelectionState();
    sel.pick(crashed);
    sel.pick(crashed);
    expect(sel.canLaunch()).toBe(true);
    expect(sel.warnings().some((w) => w.includes("zero distance"))).toBe(true);
  });

  it("warns when outcomes match without blocking", () => {
    const sel = new SelectionState();
    sel.pick(crashed);
    sel.pick(crashed2);
    expect(sel.canLaunch()).toBe(true);
    expect(sel.warnings().some((w) => w.includes("outcome"))).toBe(true);
  });

  it("clearing resets everything", () => {
    const sel = new SelectionState();
    sel.pick(crashed);
    sel.pick(solved);
    sel.activeJobId = "job-1";
    sel.clear();
    expect(sel.source).toBeNull();
    expect(sel.goal).toBeNull();
    expect(sel.activeJobId).toBeNull();
    expect(sel.canLaunch()).toBe(false);
  });

  it("maps the selection losslessly into the request body", () => {
    const sel = new SelectionState();
    sel.pick(crashed);
    sel.pick(solved);
    sel.horizon = 25;
    expect(sel.requestBody()).toEqual({
      source: { episode: "000003", step: 1 },
      goal: { episode: "000007", step: 2 },
      horizon: 25,
    });
  });

  it("refuses to build a request from a partial selection", () => {
    const sel = new SelectionState();
    sel.pick(crashed);
    expect(() => sel.requestBody()).toThrow();
  });
});
