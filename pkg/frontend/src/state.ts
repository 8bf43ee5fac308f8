/**
 * Pure editor state: session payloads, remap accumulation, history, and
 * the grid geometry shared with the engine. Everything here is plain
 * data in / data out so it can be unit-tested without a DOM.
 *
 * The label arrays and preview images are never edited locally — the
 * service response is the only source of recolor truth. The client just
 * accumulates the full override map and replays it.
 */

export type ImageSide = "target" | "reference";

export interface LegendEntry {
  label: number;
  color: string;
  in_target: boolean;
  in_reference: boolean;
}

export interface SessionStats {
  losses: Record<string, number>;
  related_fraction: number;
  policy: string;
  warnings: string[];
}

export interface SessionPayload {
  id?: string;
  k: number;
  grid_target: [number, number];
  grid_reference: [number, number];
  stride: number;
  offset_target: [number, number];
  labels_target: number[][];
  labels_reference: number[][];
  legend: LegendEntry[];
  preview_png_b64: string;
  similarity_png_b64: string;
  stats: SessionStats;
}

/** Full override maps, sent whole on every request. */
export interface RemapSpec {
  target: Record<number, number>;
  reference: Record<number, number>;
}

export interface Selection {
  side: ImageSide;
  label: number;
}

export interface EditorState {
  sessionId: string;
  payload: SessionPayload;
  selection: Selection | null;
  /** Applied specs, oldest first; index 0 is always the empty map. */
  history: RemapSpec[];
}

export function emptySpec(): RemapSpec {
  return { target: {}, reference: {} };
}

export function cloneSpec(spec: RemapSpec): RemapSpec {
  return { target: { ...spec.target }, reference: { ...spec.reference } };
}

export function initialState(payload: SessionPayload): EditorState {
  if (!payload.id) throw new Error("session payload carries no id");
  return {
    sessionId: payload.id,
    payload,
    selection: null,
    history: [emptySpec()],
  };
}

export function currentSpec(state: EditorState): RemapSpec {
  const last = state.history[state.history.length - 1];
  if (!last) throw new Error("history must never be empty");
  return last;
}

/** The spec accumulated so far plus one more override. */
export function withOverride(
  spec: RemapSpec,
  side: ImageSide,
  src: number,
  dst: number,
): RemapSpec {
  const next = cloneSpec(spec);
  next[side][src] = dst;
  return next;
}

/** True when the override would not change what the service already sees. */
export function isNoopOverride(
  spec: RemapSpec,
  side: ImageSide,
  src: number,
  dst: number,
): boolean {
  const effective = spec[side][src] ?? src;
  return effective === dst;
}

/** Message describing the first invalid entry, or null when clean. */
export function validateSpec(spec: RemapSpec, k: number): string | null {
  for (const side of ["target", "reference"] as const) {
    for (const [rawSrc, dst] of Object.entries(spec[side])) {
      const src = Number(rawSrc);
      if (
        !Number.isInteger(src) ||
        !Number.isInteger(dst) ||
        src < 0 ||
        src >= k ||
        dst < 0 ||
        dst >= k
      ) {
        return `invalid ${side} entry ${rawSrc}->${dst}: labels must be in [0, ${k})`;
      }
    }
  }
  return null;
}

export function pushApplied(state: EditorState, spec: RemapSpec): void {
  state.history.push(cloneSpec(spec));
}

/**
 * Spec to re-apply for an undo, or null when already at the start.
 * The caller posts it and records the response; the entry is only
 * dropped once the service confirms.
 */
export function undoTarget(state: EditorState): RemapSpec | null {
  if (state.history.length < 2) return null;
  const prev = state.history[state.history.length - 2];
  return prev ? cloneSpec(prev) : null;
}

export function commitUndo(state: EditorState): void {
  if (state.history.length >= 2) state.history.pop();
}

// ---------------------------------------------------------------------
// Grid geometry. Cell (ci, cj) is centered on pixel
// (offY + ci*stride + (stride-1)/2, offX + cj*stride + (stride-1)/2);
// the preview interpolates bilinearly between cell centers with clamped
// edges, exactly like the engine's upsampler.
// ---------------------------------------------------------------------

function clampIndex(v: number, n: number): number {
  return Math.min(Math.max(v, 0), n - 1);
}

export interface Cell {
  row: number;
  col: number;
}

/** Nearest cell center to a pixel; clamped to the grid. */
export function pixelToCell(
  px: number,
  py: number,
  stride: number,
  offset: [number, number],
  gridH: number,
  gridW: number,
): Cell {
  const gy = (py - offset[0] - (stride - 1) / 2) / stride;
  const gx = (px - offset[1] - (stride - 1) / 2) / stride;
  return {
    row: clampIndex(Math.round(gy), gridH),
    col: clampIndex(Math.round(gx), gridW),
  };
}

export function labelAtPixel(
  labels: number[][],
  px: number,
  py: number,
  stride: number,
  offset: [number, number],
): number {
  const gridH = labels.length;
  const gridW = labels[0]?.length ?? 0;
  const cell = pixelToCell(px, py, stride, offset, gridH, gridW);
  return labels[cell.row]![cell.col]!;
}

/** The (up to four) cells whose values a pixel interpolates between. */
export function coveringCells(
  px: number,
  py: number,
  stride: number,
  offset: [number, number],
  gridH: number,
  gridW: number,
): Cell[] {
  const gy = Math.min(
    Math.max((py - offset[0] - (stride - 1) / 2) / stride, 0),
    gridH - 1,
  );
  const gx = Math.min(
    Math.max((px - offset[1] - (stride - 1) / 2) / stride, 0),
    gridW - 1,
  );
  const y0 = Math.floor(gy);
  const x0 = Math.floor(gx);
  // integral coordinates take the whole weight: no second cell involved
  const y1 = gy === y0 ? y0 : Math.min(y0 + 1, gridH - 1);
  const x1 = gx === x0 ? x0 : Math.min(x0 + 1, gridW - 1);
  const cells: Cell[] = [];
  for (const row of new Set([y0, y1])) {
    for (const col of new Set([x0, x1])) {
      cells.push({ row, col });
    }
  }
  return cells;
}

/**
 * Pixels whose color can move when the given label's cells change:
 * everything inside the label's cells plus the bilinear skirt around
 * them. Used to check that a remap stays region-limited.
 */
export function influenceMask(
  labels: number[][],
  label: number,
  stride: number,
  offset: [number, number],
  outH: number,
  outW: number,
): boolean[] {
  const gridH = labels.length;
  const gridW = labels[0]?.length ?? 0;
  const mask = new Array<boolean>(outH * outW).fill(false);
  for (let py = 0; py < outH; py++) {
    for (let px = 0; px < outW; px++) {
      const cells = coveringCells(px, py, stride, offset, gridH, gridW);
      if (cells.some((c) => labels[c.row]![c.col]! === label)) {
        mask[py * outW + px] = true;
      }
    }
  }
  return mask;
}

/** Labels actually present in a label array, ascending. */
export function presentLabels(labels: number[][]): number[] {
  const seen = new Set<number>();
  for (const row of labels) for (const v of row) seen.add(v);
  return [...seen].sort((a, b) => a - b);
}
