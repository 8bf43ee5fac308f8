import { describe, expect, it } from "vitest";

import {
  commitUndo,
  coveringCells,
  currentSpec,
  emptySpec,
  influenceMask,
  initialState,
  isNoopOverride,
  labelAtPixel,
  pixelToCell,
  presentLabels,
  pushApplied,
  undoTarget,
  validateSpec,
  withOverride,
  type SessionPayload,
} from "../src/state.js";

function payload(): SessionPayload {
  return {
    id: "abc",
    k: 4,
    grid_target: [2, 3],
    grid_reference: [2, 2],
    stride: 4,
    offset_target: [0, 0],
    labels_target: [
      [0, 1, 1],
      [2, 2, 1],
    ],
    labels_reference: [
      [0, 1],
      [1, 3],
    ],
    legend: [],
    preview_png_b64: "",
    similarity_png_b64: "",
    stats: { losses: {}, related_fraction: 1, policy: "propagate", warnings: [] },
  };
}

describe("remap accumulation", () => {
  it("builds the full override map step by step", () => {
    let spec = emptySpec();
    spec = withOverride(spec, "target", 0, 2);
    spec = withOverride(spec, "target", 1, 2);
    spec = withOverride(spec, "reference", 3, 0);
    expect(spec).toEqual({ target: { 0: 2, 1: 2 }, reference: { 3: 0 } });
    // overriding the same source replaces, not chains
    spec = withOverride(spec, "target", 0, 3);
    expect(spec.target[0]).toBe(3);
  });

  it("does not mutate the previous spec", () => {
    const before = withOverride(emptySpec(), "target", 1, 2);
    const after = withOverride(before, "target", 1, 3);
    expect(before.target[1]).toBe(2);
    expect(after.target[1]).toBe(3);
  });

  it("flags no-op overrides, including the implicit identity", () => {
    const spec = withOverride(emptySpec(), "target", 0, 2);
    expect(isNoopOverride(spec, "target", 0, 2)).toBe(true); // already mapped
    expect(isNoopOverride(spec, "target", 1, 1)).toBe(true); // self remap
    expect(isNoopOverride(spec, "target", 0, 0)).toBe(false); // undoes 0->2
    expect(isNoopOverride(spec, "reference", 0, 2)).toBe(false);
  });

  it("validates against k and names the offender", () => {
    expect(validateSpec({ target: { 0: 1 }, reference: {} }, 4)).toBeNull();
    const bad = validateSpec({ target: { 0: 9 }, reference: {} }, 4);
    expect(bad).toContain("0->9");
    expect(bad).toContain("[0, 4)");
    expect(validateSpec({ target: {}, reference: { 7: 0 } }, 4)).toContain(
      "reference",
    );
  });
});

describe("history", () => {
  it("starts empty, pushes applied specs, undoes to the previous one", () => {
    const state = initialState(payload());
    expect(currentSpec(state)).toEqual(emptySpec());
    expect(undoTarget(state)).toBeNull();

    const first = withOverride(emptySpec(), "target", 0, 1);
    pushApplied(state, first);
    const second = withOverride(first, "target", 2, 1);
    pushApplied(state, second);
    expect(currentSpec(state)).toEqual(second);

    expect(undoTarget(state)).toEqual(first);
    commitUndo(state);
    expect(currentSpec(state)).toEqual(first);
    expect(undoTarget(state)).toEqual(emptySpec());
    commitUndo(state);
    commitUndo(state); // extra undo at the floor is a no-op
    expect(currentSpec(state)).toEqual(emptySpec());
  });

  it("history entries are snapshots, immune to later edits", () => {
    const state = initialState(payload());
    const spec = withOverride(emptySpec(), "target", 0, 1);
    pushApplied(state, spec);
    spec.target[0] = 3;
    expect(currentSpec(state).target[0]).toBe(1);
  });
});

describe("grid geometry", () => {
  it("maps pixels to the nearest cell center", () => {
    // stride 4, no offset: cell (0,0) is centered at pixel (1.5, 1.5)
    expect(pixelToCell(0, 0, 4, [0, 0], 4, 4)).toEqual({ row: 0, col: 0 });
    expect(pixelToCell(3, 3, 4, [0, 0], 4, 4)).toEqual({ row: 0, col: 0 });
    expect(pixelToCell(4, 4, 4, [0, 0], 4, 4)).toEqual({ row: 1, col: 1 });
    expect(pixelToCell(5, 2, 4, [0, 0], 4, 4)).toEqual({ row: 0, col: 1 });
    // clamped at the far edge
    expect(pixelToCell(100, 100, 4, [0, 0], 4, 4)).toEqual({ row: 3, col: 3 });
  });

  it("honors the crop offset", () => {
    // offset [2, 2]: cell centers shift two pixels down and right
    expect(pixelToCell(2, 2, 4, [2, 2], 4, 4)).toEqual({ row: 0, col: 0 });
    expect(pixelToCell(8, 2, 4, [2, 2], 4, 4)).toEqual({ row: 0, col: 1 });
  });

  it("is idempotent for repeated clicks", () => {
    const a = pixelToCell(7, 9, 4, [0, 0], 8, 8);
    const b = pixelToCell(7, 9, 4, [0, 0], 8, 8);
    expect(a).toEqual(b);
  });

  it("reads the label under a pixel", () => {
    const labels = payload().labels_target;
    expect(labelAtPixel(labels, 0, 0, 4, [0, 0])).toBe(0);
    expect(labelAtPixel(labels, 11, 0, 4, [0, 0])).toBe(1);
    expect(labelAtPixel(labels, 0, 7, 4, [0, 0])).toBe(2);
  });

  it("a 1x1 grid resolves every pixel to its single cell", () => {
    expect(pixelToCell(0, 0, 4, [0, 0], 1, 1)).toEqual({ row: 0, col: 0 });
    expect(pixelToCell(3, 3, 4, [0, 0], 1, 1)).toEqual({ row: 0, col: 0 });
  });

  it("covering cells collapse at corners and split between centers", () => {
    // top-left corner sits before the first center: only cell (0,0)
    expect(coveringCells(0, 0, 2, [0, 0], 2, 2)).toEqual([
      { row: 0, col: 0 },
    ]);
    // pixel (1, 1) with stride 2 lies between all four centers
    expect(coveringCells(1, 1, 2, [0, 0], 2, 2)).toHaveLength(4);
  });

  it("influence mask covers the label cells plus the bilinear skirt", () => {
    const labels = [
      [0, 1],
      [0, 0],
    ];
    const mask = influenceMask(labels, 1, 2, [0, 0], 4, 4);
    const at = (x: number, y: number) => mask[y * 4 + x]!;
    expect(at(3, 0)).toBe(true); // inside the label-1 cell
    expect(at(2, 2)).toBe(true); // interpolates with the label-1 center
    expect(at(0, 0)).toBe(false); // fully inside label-0 support
    expect(at(0, 3)).toBe(false);
  });

  it("lists present labels in order", () => {
    expect(presentLabels(payload().labels_target)).toEqual([0, 1, 2]);
    expect(presentLabels([[5]])).toEqual([5]);
  });
});
