/** Typed client for the calibration service. All image math happens
 * server-side; this client only moves JSON and PNG bytes. */

export interface HsvBand {
  hue_min: number;
  hue_max: number;
  sat_min: number;
  sat_max: number;
  val_min: number;
  val_max: number;
}

export interface ClassSpecData {
  class_id: number;
  name: string;
  band: HsvBand;
  min_area: number;
  morphology_open_radius: number;
  morphology_close_radius: number;
  paint_type: string;
  keypoint_mode: boolean;
}

export interface ProfileData {
  name: string;
  classes: ClassSpecData[];
  uv_exposure: number;
  std_exposure: number;
  white_balance: number;
  settle_delay_ms: number;
}

export interface KeypointData {
  class_id: number;
  u: number;
  v: number;
  area: number;
}

export interface PreviewResult {
  mask_png_base64: string;
  per_class_pixel_counts: Record<string, number>;
  keypoints: KeypointData[];
}

export interface SweepResult {
  best: number;
  scores: Record<string, number>;
}

export type PlugChannel = "uv" | "ambient";
export type PlugState = "on" | "off";
export type LightKind = "std" | "uv";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

async function readError(resp: Response): Promise<ApiError> {
  let message = resp.statusText;
  try {
    const doc = await resp.json();
    if (typeof doc?.error === "string") message = doc.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, message);
}

export class CalibApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  frameUrl(light: LightKind, exposure?: number): string {
    const params = new URLSearchParams({ light });
    if (exposure !== undefined) params.set("exposure", String(exposure));
    return `${this.baseUrl}/api/frame?${params}`;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) throw await readError(resp);
    return (await resp.json()) as T;
  }

  preview(profile: ProfileData, signal?: AbortSignal): Promise<PreviewResult> {
    return this.json<PreviewResult>("/api/preview", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(profile),
      signal,
    });
  }

  getProfile(name: string): Promise<ProfileData> {
    return this.json<ProfileData>(`/api/profile/${encodeURIComponent(name)}`);
  }

  putProfile(profile: ProfileData): Promise<ProfileData> {
    return this.json<ProfileData>(`/api/profile/${encodeURIComponent(profile.name)}`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(profile),
    });
  }

  sweep(exposures: number[]): Promise<SweepResult> {
    return this.json<SweepResult>("/api/sweep", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ exposures }),
    });
  }

  setPlug(channel: PlugChannel, state: PlugState): Promise<{ state: PlugState }> {
    return this.json<{ state: PlugState }>(`/api/plug/${channel}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ state }),
    });
  }

  capture(): Promise<{ sample_id: string }> {
    return this.json<{ sample_id: string }>("/api/capture", { method: "POST" });
  }
}
