/** Exposure picker: run a sweep, preselect the service's best candidate,
 * let the operator override by clicking a different one. */

import type { SweepResult } from "./api.js";

export type RunSweep = (exposures: number[]) => Promise<SweepResult>;

export interface SweepEntry {
  exposure: number;
  score: number;
}

export class ExposurePicker {
  private entries: SweepEntry[] = [];
  private selectedValue: number | null = null;
  private overridden = false;

  constructor(private readonly runSweep: RunSweep) {}

  get candidates(): readonly SweepEntry[] {
    return this.entries;
  }

  /** Currently selected exposure, or null before the first sweep. */
  get selected(): number | null {
    return this.selectedValue;
  }

  get isManualOverride(): boolean {
    return this.overridden;
  }

  /** Sweep the candidates; the argmax comes back preselected. The empty
   * list never reaches the service. */
  async run(exposures: number[]): Promise<SweepResult> {
    if (exposures.length === 0) {
      throw new RangeError("sweep needs at least one exposure candidate");
    }
    const result = await this.runSweep(exposures);
    this.entries = exposures.map((exposure) => ({
      exposure,
      score: result.scores[String(exposure)] ?? 0,
    }));
    this.selectedValue = result.best;
    this.overridden = false;
    return result;
  }

  /** Operator clicks a candidate; the choice persists until the next sweep. */
  choose(exposure: number): void {
    if (!this.entries.some((e) => e.exposure === exposure)) {
      throw new RangeError(`${exposure} is not among the swept candidates`);
    }
    this.selectedValue = exposure;
    this.overridden = true;
  }

  /** Write the selection into a draft via the caller-supplied setter. */
  applyTo(setUvExposure: (value: number) => void): void {
    if (this.selectedValue === null) {
      throw new Error("nothing selected; run a sweep first");
    }
    setUvExposure(this.selectedValue);
  }
}
