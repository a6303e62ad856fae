/** Debounced live preview with latest-wins cancellation.
 *
 * Slider edits call profileChanged; after the debounce window one request
 * goes out. A new request aborts any in-flight one, so at most one is ever
 * outstanding and only the newest result is applied. Transport failure
 * flips the controller offline (banner, disabled controls) until a request
 * succeeds again.
 */

import type { PreviewResult, ProfileData } from "./api.js";

export const PREVIEW_DEBOUNCE_MS = 100;

export type SendPreview = (
  profile: ProfileData,
  signal: AbortSignal,
) => Promise<PreviewResult>;

export interface PreviewEvents {
  onResult(result: PreviewResult, profile: ProfileData): void;
  /** Service unreachable or erroring; show the banner, disable controls. */
  onOffline(error: Error): void;
  /** First success after being offline; clear the banner. */
  onOnline(): void;
}

function isAbort(error: unknown): boolean {
  return error instanceof Error && error.name === "AbortError";
}

export class PreviewController {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pendingProfile: ProfileData | null = null;
  private inFlight: AbortController | null = null;
  private generation = 0;
  private offline = false;
  private disposed = false;

  constructor(
    private readonly sendPreview: SendPreview,
    private readonly events: PreviewEvents,
    private readonly debounceMs: number = PREVIEW_DEBOUNCE_MS,
  ) {}

  get isOffline(): boolean {
    return this.offline;
  }

  get hasInFlightRequest(): boolean {
    return this.inFlight !== null;
  }

  profileChanged(profile: ProfileData): void {
    if (this.disposed) return;
    this.pendingProfile = profile;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fire();
    }, this.debounceMs);
  }

  private fire(): void {
    const profile = this.pendingProfile;
    if (profile === null) return;
    this.pendingProfile = null;

    this.inFlight?.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    const generation = ++this.generation;

    this.sendPreview(profile, controller.signal).then(
      (result) => {
        if (this.disposed || generation !== this.generation) return;
        this.inFlight = null;
        if (this.offline) {
          this.offline = false;
          this.events.onOnline();
        }
        this.events.onResult(result, profile);
      },
      (error: unknown) => {
        if (this.disposed || generation !== this.generation) return;
        this.inFlight = null;
        // our own cancellation is not a service failure
        if (isAbort(error)) return;
        this.offline = true;
        this.events.onOffline(error instanceof Error ? error : new Error(String(error)));
      },
    );
  }

  dispose(): void {
    this.disposed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.inFlight?.abort();
  }
}
