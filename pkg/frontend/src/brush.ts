/**
 * Brush stamping for mask painting.
 *
 * A stamp is a radial falloff disk: weight 1 inside the hard core
 * (radius * hardness) and a linear ramp down to 0 at the rim. Add mode lifts
 * the mask toward the brush intensity with a max, erase mode attenuates it,
 * so repeated strokes are stable and never leave [0, 1].
 */

import type { MaskLayer } from "./mask.js";

export type BrushMode = "add" | "erase";

export interface BrushSettings {
  radius: number; // pixels
  hardness: number; // 0..1, fraction of the radius at full weight
  intensity: number; // 0..1, peak mask value painted (or erased)
  mode: BrushMode;
}

/** Falloff weight at distance d from the brush center. */
export function brushWeight(d: number, radius: number, hardness: number): number {
  if (d >= radius) return 0;
  const core = radius * hardness;
  if (d <= core) return 1;
  return (radius - d) / (radius - core);
}

/**
 * Apply one stamp at (cx, cy), in place. If restrict is given, only pixels
 * with a nonzero restrict entry are touched (used for region-locked painting).
 */
export function stampBrush(
  mask: MaskLayer,
  cx: number,
  cy: number,
  brush: BrushSettings,
  restrict?: Uint8Array
): void {
  const { width, height, data } = mask;
  if (restrict !== undefined && restrict.length !== data.length) {
    throw new Error("restriction bitmap does not match mask dimensions");
  }
  const r = brush.radius;
  const x0 = Math.max(0, Math.floor(cx - r));
  const x1 = Math.min(width - 1, Math.ceil(cx + r));
  const y0 = Math.max(0, Math.floor(cy - r));
  const y1 = Math.min(height - 1, Math.ceil(cy + r));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const i = y * width + x;
      if (restrict !== undefined && !restrict[i]) continue;
      const d = Math.hypot(x - cx, y - cy);
      const w = brushWeight(d, r, brush.hardness);
      if (w === 0) continue;
      if (brush.mode === "add") {
        const v = w * brush.intensity;
        if (v > data[i]) data[i] = Math.min(1, v);
      } else {
        data[i] = data[i] * (1 - w * brush.intensity);
      }
    }
  }
}

/**
 * Stamp along the segment from (x0, y0) to (x1, y1) at a spacing of half the
 * brush radius, endpoints included.
 */
export function strokeBrush(
  mask: MaskLayer,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  brush: BrushSettings,
  restrict?: Uint8Array
): void {
  const dist = Math.hypot(x1 - x0, y1 - y0);
  const spacing = Math.max(1, brush.radius / 2);
  const steps = Math.max(1, Math.ceil(dist / spacing));
  for (let s = 0; s <= steps; s++) {
    const t = s / steps;
    stampBrush(mask, x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, brush, restrict);
  }
}
