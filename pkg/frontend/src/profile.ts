/** Editable profile draft with an undo stack and a dirty flag.
 *
 * Snapshots are kept as JSON strings so undo restores the previous draft
 * byte for byte, and "dirty" means the serialized draft differs from the
 * last saved serialization. Validation mirrors the server's structural
 * rules; save stays disabled until they all hold.
 */

import type { ProfileData } from "./api.js";

export const EXPOSURE_MIN = 1e-4;
export const EXPOSURE_MAX = 1e4;

export function validateProfile(profile: ProfileData): string[] {
  const errors: string[] = [];
  if (!/^[A-Za-z0-9_-]+$/.test(profile.name)) {
    errors.push(`profile name must be alphanumeric/_/-, got "${profile.name}"`);
  }
  if (profile.classes.length === 0) {
    errors.push("profile needs at least one class");
  }
  const ids = profile.classes.map((c) => c.class_id);
  if (new Set(ids).size !== ids.length) {
    errors.push(`duplicate class ids: ${ids.join(", ")}`);
  }
  for (const spec of profile.classes) {
    const where = `class ${spec.class_id} (${spec.name})`;
    if (!Number.isInteger(spec.class_id) || spec.class_id < 1) {
      errors.push(`${where}: class_id must be an integer >= 1`);
    }
    if (spec.min_area < 0) errors.push(`${where}: min_area must be nonnegative`);
    if (spec.morphology_open_radius < 0 || spec.morphology_close_radius < 0) {
      errors.push(`${where}: morphology radii must be nonnegative`);
    }
    const b = spec.band;
    for (const [field, h] of [["hue_min", b.hue_min], ["hue_max", b.hue_max]] as const) {
      if (!Number.isFinite(h) || h < 0 || h >= 360) {
        errors.push(`${where}: ${field} must lie in [0, 360)`);
      }
    }
    for (const [field, x] of [
      ["sat_min", b.sat_min],
      ["sat_max", b.sat_max],
      ["val_min", b.val_min],
      ["val_max", b.val_max],
    ] as const) {
      if (!Number.isFinite(x) || x < 0 || x > 1) {
        errors.push(`${where}: ${field} must lie in [0, 1]`);
      }
    }
    // hue_min > hue_max is legal (wraparound band), so no ordering check
    if (b.sat_min > b.sat_max) errors.push(`${where}: sat_min exceeds sat_max`);
    if (b.val_min > b.val_max) errors.push(`${where}: val_min exceeds val_max`);
  }
  for (const [field, e] of [
    ["uv_exposure", profile.uv_exposure],
    ["std_exposure", profile.std_exposure],
  ] as const) {
    if (!(e >= EXPOSURE_MIN && e <= EXPOSURE_MAX)) {
      errors.push(`${field} outside [${EXPOSURE_MIN}, ${EXPOSURE_MAX}]`);
    }
  }
  if (profile.settle_delay_ms < 0) errors.push("settle_delay_ms must be nonnegative");
  return errors;
}

export class ProfileDraft {
  private snapshot: string;
  private savedSnapshot: string;
  private readonly undoStack: string[] = [];

  constructor(initial: ProfileData) {
    this.snapshot = JSON.stringify(initial);
    this.savedSnapshot = this.snapshot;
  }

  get current(): ProfileData {
    return JSON.parse(this.snapshot) as ProfileData;
  }

  /** Serialized form; what gets PUT to the service on save. */
  get serialized(): string {
    return this.snapshot;
  }

  get dirty(): boolean {
    return this.snapshot !== this.savedSnapshot;
  }

  get undoDepth(): number {
    return this.undoStack.length;
  }

  validationErrors(): string[] {
    return validateProfile(this.current);
  }

  get canSave(): boolean {
    return this.validationErrors().length === 0;
  }

  /** Apply an edit; a no-op mutation pushes nothing onto the undo stack. */
  update(mutate: (draft: ProfileData) => void): void {
    const next = this.current;
    mutate(next);
    const encoded = JSON.stringify(next);
    if (encoded === this.snapshot) return;
    this.undoStack.push(this.snapshot);
    this.snapshot = encoded;
  }

  setBandField(
    classIndex: number,
    field: keyof ProfileData["classes"][number]["band"],
    value: number,
  ): void {
    this.update((draft) => {
      const spec = draft.classes[classIndex];
      if (spec === undefined) {
        throw new RangeError(`no class at index ${classIndex}`);
      }
      spec.band[field] = value;
    });
  }

  setUvExposure(value: number): void {
    this.update((draft) => {
      draft.uv_exposure = value;
    });
  }

  undo(): boolean {
    const previous = this.undoStack.pop();
    if (previous === undefined) return false;
    this.snapshot = previous;
    return true;
  }

  /** Record that the current draft was persisted. */
  markSaved(): void {
    this.savedSnapshot = this.snapshot;
  }

  /** Replace the draft wholesale (e.g. after loading a stored profile);
   * clears the undo stack and the dirty flag. */
  reset(profile: ProfileData): void {
    this.snapshot = JSON.stringify(profile);
    this.savedSnapshot = this.snapshot;
    this.undoStack.length = 0;
  }
}
