/** Light switch backed by the plug endpoint.
 *
 * The indicator only ever shows a state the service acknowledged; while a
 * request is in flight further clicks are dropped, so a double-click sends
 * exactly one request. Failures leave the indicator untouched and surface
 * the error.
 */

import type { PlugChannel, PlugState } from "./api.js";

export type SetPlug = (
  channel: PlugChannel,
  state: PlugState,
) => Promise<{ state: PlugState }>;

export interface LightToggleEvents {
  onIndicator(state: PlugState | null): void;
  onError(error: Error): void;
}

export class LightToggle {
  private acknowledged: PlugState | null = null;
  private busy = false;

  constructor(
    private readonly setPlug: SetPlug,
    readonly channel: PlugChannel,
    private readonly events: LightToggleEvents,
  ) {}

  /** Last service-acknowledged state; null until the first ack. */
  get indicator(): PlugState | null {
    return this.acknowledged;
  }

  get isBusy(): boolean {
    return this.busy;
  }

  /** Returns true if a request was sent, false if one was already in flight. */
  async request(state: PlugState): Promise<boolean> {
    if (this.busy) return false;
    this.busy = true;
    try {
      const ack = await this.setPlug(this.channel, state);
      this.acknowledged = ack.state;
      this.events.onIndicator(this.acknowledged);
    } catch (error: unknown) {
      this.events.onError(error instanceof Error ? error : new Error(String(error)));
    } finally {
      this.busy = false;
    }
    return true;
  }
}
