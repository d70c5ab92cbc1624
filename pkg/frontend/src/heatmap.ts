import type { SaliencyGrid } from "./types.js";

// Compact viridis-style ramp; enough stops for a smooth overlay.
const RAMP: Array<[number, number, number]> = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

function rampColor(t: number): [number, number, number] {
  const clamped = Math.min(Math.max(t, 0), 1);
  const pos = clamped * (RAMP.length - 1);
  const i = Math.min(Math.floor(pos), RAMP.length - 2);
  const f = pos - i;
  const a = RAMP[i]!;
  const b = RAMP[i + 1]!;
  return [
    Math.round(a[0] + (b[0] - a[0]) * f),
    Math.round(a[1] + (b[1] - a[1]) * f),
    Math.round(a[2] + (b[2] - a[2]) * f),
  ];
}

/**
 * Paint the score grid onto a canvas (one pixel per cell, scaled by CSS).
 * Scores are normalized by the grid maximum; an all-zero grid paints the
 * bottom ramp color everywhere.
 */
export function drawHeatmap(canvas: HTMLCanvasElement, grid: SaliencyGrid): void {
  canvas.width = grid.grid_w;
  canvas.height = grid.grid_h;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  let max = 0;
  for (const row of grid.scores) for (const v of row) max = Math.max(max, v);
  const image = ctx.createImageData(grid.grid_w, grid.grid_h);
  for (let j = 0; j < grid.grid_h; j++) {
    const row = grid.scores[j] ?? [];
    for (let i = 0; i < grid.grid_w; i++) {
      const t = max > 0 ? (row[i] ?? 0) / max : 0;
      const [r, g, b] = rampColor(t);
      const off = (j * grid.grid_w + i) * 4;
      image.data[off] = r;
      image.data[off + 1] = g;
      image.data[off + 2] = b;
      image.data[off + 3] = 255;
    }
  }
  ctx.putImageData(image, 0, 0);
}
