/** Page wiring. All state lives in the controllers; this file only builds
 * DOM, forwards events, and paints results. */

import { ApiError, CalibApi } from "./api.js";
import type { HsvBand, PlugState, PreviewResult, ProfileData } from "./api.js";
import { decodeMaskInBrowser, renderOverlay } from "./overlay.js";
import { LightToggle } from "./plug.js";
import { PreviewController } from "./preview.js";
import { ProfileDraft } from "./profile.js";
import { ExposurePicker } from "./sweep.js";

const STARTER_PROFILE: ProfileData = {
  name: "draft",
  classes: [
    {
      class_id: 1,
      name: "class-1",
      band: {
        hue_min: 300.0,
        hue_max: 40.0,
        sat_min: 0.3,
        sat_max: 1.0,
        val_min: 0.2,
        val_max: 1.0,
      },
      min_area: 10,
      morphology_open_radius: 1,
      morphology_close_radius: 1,
      paint_type: "lacquer",
      keypoint_mode: false,
    },
  ],
  uv_exposure: 0.6,
  std_exposure: 1.0,
  white_balance: 4600.0,
  settle_delay_ms: 250,
};

const BAND_FIELDS: Array<{ key: keyof HsvBand; max: number; step: number }> = [
  { key: "hue_min", max: 359.9, step: 0.1 },
  { key: "hue_max", max: 359.9, step: 0.1 },
  { key: "sat_min", max: 1, step: 0.01 },
  { key: "sat_max", max: 1, step: 0.01 },
  { key: "val_min", max: 1, step: 0.01 },
  { key: "val_max", max: 1, step: 0.01 },
];

function serviceBaseUrl(): string {
  const override = new URLSearchParams(location.search).get("service");
  return override ?? location.origin;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.status}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}

function main(): void {
  const api = new CalibApi(serviceBaseUrl());
  const draft = new ProfileDraft(STARTER_PROFILE);

  const banner = byId<HTMLDivElement>("banner");
  const controls = byId<HTMLFieldSetElement>("controls");
  const frameImg = byId<HTMLImageElement>("frame");
  const overlayCanvas = byId<HTMLCanvasElement>("overlay");
  const countsNode = byId<HTMLPreElement>("counts");
  const sliderBox = byId<HTMLDivElement>("sliders");
  const statusNode = byId<HTMLSpanElement>("save-status");
  const errorsNode = byId<HTMLUListElement>("validation-errors");
  const saveButton = byId<HTMLButtonElement>("save");
  const undoButton = byId<HTMLButtonElement>("undo");

  async function paintOverlay(result: PreviewResult): Promise<void> {
    const { classes, width, height } = await decodeMaskInBrowser(result.mask_png_base64);
    overlayCanvas.width = width;
    overlayCanvas.height = height;
    const ctx = overlayCanvas.getContext("2d");
    if (ctx === null) return;
    ctx.putImageData(new ImageData(renderOverlay(classes), width, height), 0, 0);
    countsNode.textContent = Object.entries(result.per_class_pixel_counts)
      .map(([id, n]) => `class ${id}: ${n} px`)
      .join("\n");
  }

  const preview = new PreviewController(
    (profile, signal) => api.preview(profile, signal),
    {
      onResult: (result) => {
        void paintOverlay(result);
      },
      onOffline: (error) => {
        banner.textContent = `service unreachable: ${describe(error)}`;
        banner.hidden = false;
        controls.disabled = true;
      },
      onOnline: () => {
        banner.hidden = true;
        controls.disabled = false;
      },
    },
  );

  function refreshFrame(): void {
    frameImg.src = api.frameUrl("uv", draft.current.uv_exposure) + `&t=${Date.now()}`;
  }

  function refreshMeta(): void {
    const errors = draft.validationErrors();
    errorsNode.replaceChildren(
      ...errors.map((text) => {
        const li = document.createElement("li");
        li.textContent = text;
        return li;
      }),
    );
    saveButton.disabled = !draft.canSave;
    undoButton.disabled = draft.undoDepth === 0;
    statusNode.textContent = draft.dirty ? "unsaved changes" : "saved";
  }

  function draftEdited(): void {
    refreshMeta();
    preview.profileChanged(draft.current);
  }

  function buildSliders(): void {
    sliderBox.replaceChildren();
    draft.current.classes.forEach((spec, index) => {
      const legend = document.createElement("h3");
      legend.textContent = `${spec.name} (id ${spec.class_id})`;
      sliderBox.append(legend);
      for (const { key, max, step } of BAND_FIELDS) {
        const row = document.createElement("label");
        row.className = "slider-row";
        const title = document.createElement("span");
        title.textContent = key;
        const slider = document.createElement("input");
        slider.type = "range";
        slider.min = "0";
        slider.max = String(max);
        slider.step = String(step);
        slider.value = String(spec.band[key]);
        const readout = document.createElement("output");
        readout.textContent = slider.value;
        slider.addEventListener("input", () => {
          readout.textContent = slider.value;
          draft.setBandField(index, key, Number(slider.value));
          draftEdited();
        });
        row.append(title, slider, readout);
        sliderBox.append(row);
      }
    });
  }

  // exposure picker
  const picker = new ExposurePicker((exposures) => api.sweep(exposures));
  const sweepButton = byId<HTMLButtonElement>("sweep");
  const sweepInput = byId<HTMLInputElement>("sweep-exposures");
  const sweepList = byId<HTMLDivElement>("sweep-candidates");

  function renderCandidates(): void {
    sweepList.replaceChildren(
      ...picker.candidates.map((entry) => {
        const button = document.createElement("button");
        button.textContent = `${entry.exposure} (${entry.score} px)`;
        button.classList.toggle("selected", picker.selected === entry.exposure);
        button.addEventListener("click", () => {
          picker.choose(entry.exposure);
          picker.applyTo((value) => draft.setUvExposure(value));
          renderCandidates();
          refreshFrame();
          draftEdited();
        });
        return button;
      }),
    );
  }

  sweepButton.addEventListener("click", () => {
    const exposures = sweepInput.value
      .split(",")
      .map((s) => s.trim())
      .filter((s) => s.length > 0)
      .map(Number);
    if (exposures.length === 0 || exposures.some((e) => !Number.isFinite(e) || e <= 0)) {
      banner.textContent = "sweep needs a comma-separated list of positive exposures";
      banner.hidden = false;
      return;
    }
    banner.hidden = true;
    picker.run(exposures).then(
      () => {
        picker.applyTo((value) => draft.setUvExposure(value));
        renderCandidates();
        refreshFrame();
        draftEdited();
      },
      (error: unknown) => {
        banner.textContent = `sweep failed: ${describe(error)}`;
        banner.hidden = false;
      },
    );
  });

  // light switches
  for (const channel of ["uv", "ambient"] as const) {
    const button = byId<HTMLButtonElement>(`plug-${channel}`);
    const lamp = byId<HTMLSpanElement>(`lamp-${channel}`);
    const toggle = new LightToggle((ch, state) => api.setPlug(ch, state), channel, {
      onIndicator: (state: PlugState | null) => {
        lamp.dataset["state"] = state ?? "unknown";
        lamp.textContent = state ?? "?";
      },
      onError: (error) => {
        banner.textContent = `plug ${channel}: ${describe(error)}`;
        banner.hidden = false;
      },
    });
    button.addEventListener("click", () => {
      const next: PlugState = toggle.indicator === "on" ? "off" : "on";
      void toggle.request(next);
    });
  }

  // save / load / undo
  saveButton.addEventListener("click", () => {
    const nameInput = byId<HTMLInputElement>("profile-name");
    draft.update((p) => {
      p.name = nameInput.value || p.name;
    });
    api.putProfile(draft.current).then(
      () => {
        draft.markSaved();
        refreshMeta();
      },
      (error: unknown) => {
        banner.textContent = `save failed: ${describe(error)}`;
        banner.hidden = false;
      },
    );
  });

  byId<HTMLButtonElement>("load").addEventListener("click", () => {
    const name = byId<HTMLInputElement>("profile-name").value;
    api.getProfile(name).then(
      (profile) => {
        draft.reset(profile);
        buildSliders();
        refreshFrame();
        draftEdited();
      },
      (error: unknown) => {
        banner.textContent = `load failed: ${describe(error)}`;
        banner.hidden = false;
      },
    );
  });

  undoButton.addEventListener("click", () => {
    if (draft.undo()) {
      buildSliders();
      draftEdited();
    }
  });

  byId<HTMLButtonElement>("capture").addEventListener("click", () => {
    api.capture().then(
      ({ sample_id }) => {
        statusNode.textContent = `captured ${sample_id}`;
      },
      (error: unknown) => {
        banner.textContent = `capture failed: ${describe(error)}`;
        banner.hidden = false;
      },
    );
  });

  buildSliders();
  refreshMeta();
  refreshFrame();
  preview.profileChanged(draft.current);
}

main();
