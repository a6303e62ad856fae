import { describe, expect, it, vi } from "vitest";

import type { PlugState } from "../src/api.js";
import { LightToggle } from "../src/plug.js";

function harness(
  transport: (state: PlugState) => Promise<{ state: PlugState }>,
) {
  const indicators: Array<PlugState | null> = [];
  const errors: unknown[] = [];
  const toggle = new LightToggle(async (_channel, state) => transport(state), "uv", {
    onIndicator: (s) => indicators.push(s),
    onError: (e) => errors.push(e),
  });
  return { toggle, indicators, errors };
}

describe("LightToggle", () => {
  it("indicator is unknown until the service acknowledges", async () => {
    const { toggle, indicators } = harness(async (state) => ({ state }));
    expect(toggle.indicator).toBeNull();
    await toggle.request("on");
    expect(toggle.indicator).toBe("on");
    expect(indicators).toEqual(["on"]);
  });

  it("reflects the acknowledged state, not the requested one", async () => {
    // A relay that refuses to switch answers with its actual state.
    const { toggle } = harness(async () => ({ state: "off" }));
    await toggle.request("on");
    expect(toggle.indicator).toBe("off");
  });

  it("leaves the indicator alone on transport error and surfaces it", async () => {
    const { toggle, indicators, errors } = harness(async (state) => ({ state }));
    await toggle.request("on");

    const { toggle: failing, errors: failures } = harness(async () => {
      throw new TypeError("fetch failed");
    });
    await failing.request("on");
    expect(failing.indicator).toBeNull();
    expect(failures).toHaveLength(1);

    expect(toggle.indicator).toBe("on");
    expect(indicators).toEqual(["on"]);
    expect(errors).toEqual([]);
  });

  it("coalesces a rapid double click into a single request", async () => {
    let release: (() => void) | null = null;
    const transport = vi.fn(
      (state: PlugState) =>
        new Promise<{ state: PlugState }>((resolve) => {
          release = () => resolve({ state });
        }),
    );
    const toggle = new LightToggle(
      async (_channel, state) => transport(state),
      "uv",
      { onIndicator: () => undefined, onError: () => undefined },
    );

    const first = toggle.request("on");
    const second = toggle.request("on");
    await expect(second).resolves.toBe(false);
    expect(toggle.isBusy).toBe(true);

    release!();
    await expect(first).resolves.toBe(true);
    expect(transport).toHaveBeenCalledTimes(1);
    expect(toggle.isBusy).toBe(false);
  });

  it("accepts a new request once the previous one settles", async () => {
    const transport = vi.fn(async (state: PlugState) => ({ state }));
    const toggle = new LightToggle(
      async (_channel, state) => transport(state),
      "ambient",
      { onIndicator: () => undefined, onError: () => undefined },
    );
    await toggle.request("on");
    await toggle.request("off");
    expect(transport).toHaveBeenCalledTimes(2);
    expect(toggle.indicator).toBe("off");
  });
});
