/**
 * Canvas drawing for the three panes. Pixel images come from the
 * service as base64 PNG; label overlays are painted per cell on top.
 */

import type { LegendEntry } from "./state.js";

export function pngDataUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

export function loadImage(b64: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error("broken image payload"));
    img.src = pngDataUrl(b64);
  });
}

export async function drawBitmap(
  canvas: HTMLCanvasElement,
  b64: string,
): Promise<void> {
  const img = await loadImage(b64);
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(img, 0, 0);
}

/** Stretch a grid-resolution bitmap (e.g. the similarity map) to size. */
export async function drawBitmapScaled(
  canvas: HTMLCanvasElement,
  b64: string,
  width: number,
  height: number,
): Promise<void> {
  const img = await loadImage(b64);
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(img, 0, 0, width, height);
}

function colorOf(legend: LegendEntry[], label: number): string {
  return legend.find((e) => e.label === label)?.color ?? "#888888";
}

/**
 * Paint the class overlay: a translucent wash per cell, and a solid
 * outline around every cell of the selected label.
 */
export function drawLabelOverlay(
  canvas: HTMLCanvasElement,
  labels: number[][],
  legend: LegendEntry[],
  stride: number,
  offset: [number, number],
  width: number,
  height: number,
  selected: number | null,
): void {
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, width, height);
  const gridH = labels.length;
  const gridW = labels[0]?.length ?? 0;
  for (let ci = 0; ci < gridH; ci++) {
    for (let cj = 0; cj < gridW; cj++) {
      const label = labels[ci]![cj]!;
      const x = offset[1] + cj * stride;
      const y = offset[0] + ci * stride;
      ctx.fillStyle = colorOf(legend, label) + "40"; // ~25% alpha wash
      ctx.fillRect(x, y, stride, stride);
    }
  }
  if (selected === null) return;
  ctx.strokeStyle = colorOf(legend, selected);
  ctx.lineWidth = 2;
  for (let ci = 0; ci < gridH; ci++) {
    for (let cj = 0; cj < gridW; cj++) {
      if (labels[ci]![cj] !== selected) continue;
      const x = offset[1] + cj * stride;
      const y = offset[0] + ci * stride;
      ctx.strokeRect(x + 1, y + 1, stride - 2, stride - 2);
    }
  }
}
