/**
 * Editor flows against a real service instance (started by the global
 * setup). These are the contract checks: identity remaps change
 * nothing, a remap recolors only the region it names, and undo walks
 * the preview back byte-for-byte.
 */

import { readFileSync } from "node:fs";
import { PNG } from "pngjs";
import { afterAll, beforeAll, describe, expect, inject, it } from "vitest";

import {
  ApiError,
  createSession,
  deleteSession,
  fetchArtifact,
  postRemap,
  type Client,
} from "../src/api.js";
import {
  commitUndo,
  currentSpec,
  emptySpec,
  influenceMask,
  initialState,
  presentLabels,
  pushApplied,
  undoTarget,
  withOverride,
  type EditorState,
} from "../src/state.js";

const client: Client = { baseUrl: inject("baseUrl") };

let state: EditorState;

function decode(b64: string): PNG {
  return PNG.sync.read(Buffer.from(b64, "base64"));
}

function pixelEqual(a: PNG, b: PNG, idx: number): boolean {
  const o = idx * 4;
  return (
    a.data[o] === b.data[o] &&
    a.data[o + 1] === b.data[o + 1] &&
    a.data[o + 2] === b.data[o + 2] &&
    a.data[o + 3] === b.data[o + 3]
  );
}

beforeAll(async () => {
  const png = readFileSync(inject("fixturePng"));
  const blob = new Blob([png], { type: "image/png" });
  // the same image on both sides: every class is shared by construction,
  // so no cell is unrelated and the fill path stays out of the picture
  const payload = await createSession(client, blob, blob, {
    initial_classes: 8,
    reduced_k: 6,
  });
  state = initialState(payload);
  expect(payload.stats.related_fraction).toBe(1.0);
});

afterAll(async () => {
  if (state) await deleteSession(client, state.sessionId);
});

describe("identity remaps", () => {
  it("an empty override map returns a byte-identical preview", async () => {
    const again = await postRemap(client, state.sessionId, emptySpec());
    expect(again.preview_png_b64).toBe(state.payload.preview_png_b64);
    expect(again.similarity_png_b64).toBe(state.payload.similarity_png_b64);
    expect(again.labels_target).toEqual(state.payload.labels_target);
  });

  it("remapping a label onto itself changes nothing", async () => {
    const label = presentLabels(state.payload.labels_target)[0]!;
    const spec = withOverride(emptySpec(), "target", label, label);
    const again = await postRemap(client, state.sessionId, spec);
    expect(again.preview_png_b64).toBe(state.payload.preview_png_b64);
  });
});

describe("region-limited remap, then undo", () => {
  it("recolors only the remapped class's support, and undo restores", async () => {
    const p = state.payload;
    const inReference = new Set(
      p.legend.filter((e) => e.in_reference).map((e) => e.label),
    );
    const targetLabels = presentLabels(p.labels_target).filter((l) =>
      inReference.has(l),
    );
    expect(targetLabels.length).toBeGreaterThan(1);
    const src = targetLabels[0]!;
    const dst = targetLabels[targetLabels.length - 1]!;

    const spec = withOverride(currentSpec(state), "target", src, dst);
    const after = await postRemap(client, state.sessionId, spec);

    const before = decode(p.preview_png_b64);
    const changed = decode(after.preview_png_b64);
    expect([changed.width, changed.height]).toEqual([
      before.width,
      before.height,
    ]);
    const mask = influenceMask(
      p.labels_target,
      src,
      p.stride,
      p.offset_target,
      before.height,
      before.width,
    );
    let insideChanged = 0;
    for (let i = 0; i < before.width * before.height; i++) {
      if (mask[i]) {
        if (!pixelEqual(before, changed, i)) insideChanged++;
      } else {
        expect(pixelEqual(before, changed, i)).toBe(true);
      }
    }
    expect(insideChanged).toBeGreaterThan(0);

    // the merged class map is what the service now reports
    expect(presentLabels(after.labels_target)).not.toContain(src);
    expect(presentLabels(after.labels_target)).toContain(dst);
    pushApplied(state, spec);

    // artifact view agrees: SPTN header, i32, grid dims, src gone
    const buf = Buffer.from(
      await fetchArtifact(client, state.sessionId, "class_target"),
    );
    expect(buf.subarray(0, 4).toString("ascii")).toBe("SPTN");
    expect(buf[4]).toBe(1); // format version
    expect(buf[5]).toBe(1); // i32 payload
    expect(buf[6]).toBe(2); // rank 2
    expect(buf.readUInt32LE(8)).toBe(p.grid_target[0]);
    expect(buf.readUInt32LE(12)).toBe(p.grid_target[1]);
    const cells = p.grid_target[0] * p.grid_target[1];
    const labels = new Set<number>();
    for (let i = 0; i < cells; i++) labels.add(buf.readInt32LE(16 + 4 * i));
    expect(labels.has(src)).toBe(false);

    // undo: re-apply the previous override map, get the old bytes back
    const prev = undoTarget(state);
    expect(prev).toEqual(emptySpec());
    const restored = await postRemap(client, state.sessionId, prev!);
    commitUndo(state);
    expect(restored.preview_png_b64).toBe(p.preview_png_b64);

    // replaying the remap reproduces the remapped preview exactly
    const replayed = await postRemap(client, state.sessionId, spec);
    expect(replayed.preview_png_b64).toBe(after.preview_png_b64);
    await postRemap(client, state.sessionId, currentSpec(state));
  });
});

describe("validation and lifecycle", () => {
  it("rejects an out-of-range label and leaves the session unchanged", async () => {
    const err = await postRemap(client, state.sessionId, {
      target: { 0: 99 },
      reference: {},
    }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
    expect(err.message).toContain("0->99");
    const after = await postRemap(client, state.sessionId, emptySpec());
    expect(after.preview_png_b64).toBe(state.payload.preview_png_b64);
  });

  it("a deleted session stops answering", async () => {
    const png = readFileSync(inject("fixturePng"));
    const blob = new Blob([png], { type: "image/png" });
    const extra = await createSession(client, blob, blob, {
      initial_classes: 4,
      reduced_k: 4,
    });
    await deleteSession(client, extra.id!);
    const err = await postRemap(client, extra.id!, emptySpec()).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
  });
});
