/**
 * Editor shell: upload a pair, inspect both segmentations, click a
 * region, send it to another class, watch the preview recolor.
 *
 * One remap request is in flight at a time; clicks that land while a
 * request is pending coalesce into the latest desired override map.
 */

import { createSession, postRemap, ApiError, type Client } from "./api.js";
import { drawBitmap, drawBitmapScaled, drawLabelOverlay } from "./render.js";
import {
  commitUndo,
  currentSpec,
  initialState,
  isNoopOverride,
  labelAtPixel,
  pushApplied,
  undoTarget,
  validateSpec,
  withOverride,
  type EditorState,
  type ImageSide,
  type RemapSpec,
  type SessionPayload,
} from "./state.js";

const client: Client = { baseUrl: "" };

let state: EditorState | null = null;
let busy = false;
let queued: RemapSpec | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const bar = el<HTMLDivElement>("status");
  bar.textContent = text;
  bar.className = isError ? "status error" : "status";
}

function sideLabels(payload: SessionPayload, side: ImageSide): number[][] {
  return side === "target" ? payload.labels_target : payload.labels_reference;
}

async function redraw(): Promise<void> {
  if (!state) return;
  const p = state.payload;
  await drawBitmap(el<HTMLCanvasElement>("preview"), p.preview_png_b64);
  const preview = el<HTMLCanvasElement>("preview");
  await drawBitmapScaled(
    el<HTMLCanvasElement>("heatmap"),
    p.similarity_png_b64,
    preview.width,
    preview.height,
  );
  for (const side of ["target", "reference"] as const) {
    const image = el<HTMLCanvasElement>(`${side}-image`);
    const overlay = el<HTMLCanvasElement>(`${side}-overlay`);
    const selected =
      state.selection && state.selection.side === side
        ? state.selection.label
        : null;
    drawLabelOverlay(
      overlay,
      sideLabels(p, side),
      p.legend,
      p.stride,
      side === "target" ? p.offset_target : [0, 0],
      image.width,
      image.height,
      selected,
    );
  }
  renderLegend();
  renderStats();
  el<HTMLButtonElement>("undo").disabled = busy || state.history.length < 2;
}

function renderLegend(): void {
  if (!state) return;
  const box = el<HTMLDivElement>("legend");
  box.innerHTML = "";
  for (const entry of state.payload.legend) {
    const chip = document.createElement("button");
    chip.className = "chip";
    if (state.selection?.label === entry.label) chip.classList.add("focused");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = entry.color;
    chip.appendChild(swatch);
    const where = [
      entry.in_target ? "T" : "",
      entry.in_reference ? "R" : "",
    ].join("");
    chip.appendChild(
      document.createTextNode(` ${entry.label} ${where ? `(${where})` : ""}`),
    );
    chip.title = state.selection
      ? `send class ${state.selection.label} to class ${entry.label}`
      : "select a region first";
    chip.addEventListener("click", () => onLegendClick(entry.label));
    box.appendChild(chip);
  }
}

function renderStats(): void {
  if (!state) return;
  const s = state.payload.stats;
  const losses = s.losses;
  el<HTMLDivElement>("stats").textContent =
    `related ${(s.related_fraction * 100).toFixed(1)}%  |  ` +
    `l1 ${losses["l1"]?.toFixed(3)}  total ${losses["total"]?.toFixed(3)}  |  ` +
    `fill: ${s.policy}` +
    (s.warnings.length ? `  |  ${s.warnings.join("; ")}` : "");
}

function onPaneClick(side: ImageSide, ev: MouseEvent): void {
  if (!state) return;
  const canvas = el<HTMLCanvasElement>(`${side}-image`);
  const rect = canvas.getBoundingClientRect();
  const px = Math.floor(((ev.clientX - rect.left) / rect.width) * canvas.width);
  const py = Math.floor(
    ((ev.clientY - rect.top) / rect.height) * canvas.height,
  );
  if (px < 0 || py < 0 || px >= canvas.width || py >= canvas.height) return;
  const p = state.payload;
  const label = labelAtPixel(
    sideLabels(p, side),
    px,
    py,
    p.stride,
    side === "target" ? p.offset_target : [0, 0],
  );
  state.selection = { side, label };
  setStatus(`selected class ${label} on the ${side} image`);
  void redraw();
}

function onLegendClick(dst: number): void {
  if (!state || !state.selection) {
    setStatus("click a region first, then the class to send it to");
    return;
  }
  const { side, label } = state.selection;
  const spec = currentSpec(state);
  if (isNoopOverride(spec, side, label, dst)) {
    setStatus(`no-op: class ${label} already renders as class ${dst}`);
    return;
  }
  const next = withOverride(spec, side, label, dst);
  const problem = validateSpec(next, state.payload.k);
  if (problem) {
    setStatus(problem, true);
    return;
  }
  submit(next, `class ${label} -> ${dst} on ${side}`);
}

function submit(spec: RemapSpec, what: string): void {
  if (busy) {
    queued = spec;
    setStatus(`queued: ${what}`);
    return;
  }
  busy = true;
  setStatus(`applying ${what} ...`);
  void (async () => {
    try {
      const payload = await postRemap(client, state!.sessionId, spec);
      payload.id = state!.sessionId;
      state!.payload = payload;
      pushApplied(state!, spec);
      setStatus(`applied ${what}`);
    } catch (err) {
      setStatus(describe(err), true);
    } finally {
      busy = false;
      await redraw();
      const next = queued;
      queued = null;
      if (next) submit(next, "queued remap");
    }
  })();
}

function onUndo(): void {
  if (!state || busy) return;
  const prev = undoTarget(state);
  if (!prev) {
    setStatus("nothing to undo");
    return;
  }
  busy = true;
  setStatus("undoing ...");
  void (async () => {
    try {
      const payload = await postRemap(client, state!.sessionId, prev);
      payload.id = state!.sessionId;
      state!.payload = payload;
      commitUndo(state!);
      state!.selection = null;
      setStatus("undid last remap");
    } catch (err) {
      setStatus(describe(err), true);
    } finally {
      busy = false;
      await redraw();
    }
  })();
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `service said: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

async function onStart(): Promise<void> {
  const targetFile = el<HTMLInputElement>("target-file").files?.[0];
  const referenceFile = el<HTMLInputElement>("reference-file").files?.[0];
  if (!targetFile || !referenceFile) {
    setStatus("choose both a target and a reference image", true);
    return;
  }
  setStatus("starting session ...");
  try {
    const payload = await createSession(client, targetFile, referenceFile);
    state = initialState(payload);
    await drawBitmap(
      el<HTMLCanvasElement>("target-image"),
      await blobToB64(targetFile),
    );
    await drawBitmap(
      el<HTMLCanvasElement>("reference-image"),
      await blobToB64(referenceFile),
    );
    el<HTMLDivElement>("workspace").style.display = "";
    setStatus(
      `session ready: ${payload.k} classes over a ` +
        `${payload.grid_target[1]}x${payload.grid_target[0]} cell grid`,
    );
    await redraw();
  } catch (err) {
    setStatus(describe(err), true);
  }
}

function blobToB64(blob: Blob): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () =>
      resolve((reader.result as string).split(",", 2)[1] ?? "");
    reader.onerror = () => reject(new Error("unreadable file"));
    reader.readAsDataURL(blob);
  });
}

function wire(): void {
  el<HTMLButtonElement>("start").addEventListener("click", () => {
    void onStart();
  });
  el<HTMLButtonElement>("undo").addEventListener("click", onUndo);
  el<HTMLInputElement>("show-heatmap").addEventListener("change", (ev) => {
    const on = (ev.target as HTMLInputElement).checked;
    el<HTMLCanvasElement>("heatmap").style.display = on ? "" : "none";
  });
  for (const side of ["target", "reference"] as const) {
    el<HTMLCanvasElement>(`${side}-overlay`).addEventListener(
      "click",
      (ev) => onPaneClick(side, ev),
    );
  }
}

wire();
