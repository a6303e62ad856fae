import { describe, expect, it, vi } from "vitest";

import type { SweepResult } from "../src/api.js";
import { ExposurePicker } from "../src/sweep.js";

const canned: SweepResult = {
  best: 0.6,
  scores: { "0.15": 0, "0.6": 1994, "1.8": 12 },
};

describe("ExposurePicker", () => {
  it("rejects an empty candidate list before touching the service", async () => {
    const runSweep = vi.fn(async () => canned);
    const picker = new ExposurePicker(runSweep);
    await expect(picker.run([])).rejects.toThrow(RangeError);
    expect(runSweep).not.toHaveBeenCalled();
  });

  it("preselects the service's best exposure", async () => {
    const picker = new ExposurePicker(async () => canned);
    await picker.run([0.15, 0.6, 1.8]);
    expect(picker.selected).toBe(0.6);
    expect(picker.isManualOverride).toBe(false);
    expect(picker.candidates.map((c) => c.score)).toEqual([0, 1994, 12]);
  });

  it("lets the operator override the preselection", async () => {
    const picker = new ExposurePicker(async () => canned);
    await picker.run([0.15, 0.6, 1.8]);
    picker.choose(1.8);
    expect(picker.selected).toBe(1.8);
    expect(picker.isManualOverride).toBe(true);
  });

  it("refuses to choose an exposure that was never swept", async () => {
    const picker = new ExposurePicker(async () => canned);
    await picker.run([0.15, 0.6, 1.8]);
    expect(() => picker.choose(2.4)).toThrow(RangeError);
    expect(picker.selected).toBe(0.6);
  });

  it("persists the override into the draft via applyTo", async () => {
    const picker = new ExposurePicker(async () => canned);
    await picker.run([0.15, 0.6, 1.8]);
    picker.choose(1.8);
    let stored = 0;
    picker.applyTo((v) => {
      stored = v;
    });
    expect(stored).toBe(1.8);
  });

  it("applyTo before any sweep is an error", () => {
    const picker = new ExposurePicker(async () => canned);
    expect(() => picker.applyTo(() => undefined)).toThrow();
  });

  it("a new sweep clears a previous manual override", async () => {
    const picker = new ExposurePicker(async () => canned);
    await picker.run([0.15, 0.6, 1.8]);
    picker.choose(0.15);
    await picker.run([0.15, 0.6, 1.8]);
    expect(picker.selected).toBe(0.6);
    expect(picker.isManualOverride).toBe(false);
  });

  it("scores missing from the response default to zero", async () => {
    const picker = new ExposurePicker(async () => ({
      best: 0.6,
      scores: { "0.6": 5 },
    }));
    await picker.run([0.3, 0.6]);
    expect(picker.candidates).toEqual([
      { exposure: 0.3, score: 0 },
      { exposure: 0.6, score: 5 },
    ]);
  });
});
