/**
 * Client-side mask math, kept in lockstep with the service's semantics.
 *
 * Masks live in [0, 1] as float32 so the editor quantizes on exactly the
 * same grid as the backend. Quantization mirrors numpy's half-to-even
 * rounding; combine/erase are pure selection logic (max and where), so they
 * agree with the server bit for bit on quantized inputs.
 */

import { decodeGrayPng, encodeGrayPng } from "./png.js";

export const REGION_NAMES = ["lips", "eyes", "skin", "other"] as const;
export type RegionName = (typeof REGION_NAMES)[number];

/** Round like np.round: ties go to the nearest even integer. */
export function roundHalfToEven(x: number): number {
  const lo = Math.floor(x);
  const diff = x - lo;
  if (diff < 0.5) return lo;
  if (diff > 0.5) return lo + 1;
  return lo % 2 === 0 ? lo : lo + 1;
}

export class MaskLayer {
  public readonly width: number;
  public readonly height: number;
  public readonly data: Float32Array; // row major, values in [0, 1]

  constructor(width: number, height: number, data: Float32Array) {
    if (data.length !== width * height) {
      throw new Error(`mask buffer length ${data.length} does not match ${width}x${height}`);
    }
    for (let i = 0; i < data.length; i++) {
      const v = data[i];
      if (!(v >= 0 && v <= 1)) {
        throw new Error(`mask values must lie in [0, 1], got ${v}`);
      }
    }
    this.width = width;
    this.height = height;
    this.data = data;
  }

  public static zeros(width: number, height: number): MaskLayer {
    return new MaskLayer(width, height, new Float32Array(width * height));
  }

  public static fromPngBytes(bytes: Uint8Array): MaskLayer {
    const img = decodeGrayPng(bytes);
    const data = new Float32Array(img.width * img.height);
    for (let i = 0; i < data.length; i++) data[i] = img.data[i] / 255;
    return new MaskLayer(img.width, img.height, data);
  }

  public clone(): MaskLayer {
    return new MaskLayer(this.width, this.height, this.data.slice());
  }

  /** 8-bit pixels after half-to-even rounding, the on-disk representation. */
  public quantized(): Uint8Array {
    const out = new Uint8Array(this.data.length);
    for (let i = 0; i < this.data.length; i++) {
      out[i] = roundHalfToEven(this.data[i] * 255);
    }
    return out;
  }

  public toPngBytes(): Uint8Array {
    return encodeGrayPng({ width: this.width, height: this.height, data: this.quantized() });
  }
}

export interface RegionSelection {
  regions: readonly string[];
  freehand?: Uint8Array; // 0/1 per pixel, same dims as the region layers
}

/**
 * Resolve a selection against the region layers, as the server does:
 * a pixel is selected when any chosen layer exceeds 0.5 there, or when the
 * freehand bitmap marks it.
 */
export function selectionPixels(
  selection: RegionSelection,
  regionMap: Record<string, MaskLayer>
): Uint8Array {
  for (const name of selection.regions) {
    if (!(REGION_NAMES as readonly string[]).includes(name)) {
      throw new Error(`unknown region id: ${name}`);
    }
    if (!(name in regionMap)) {
      throw new Error(`region map lacks layer "${name}"`);
    }
  }
  const layers = Object.values(regionMap);
  if (layers.length === 0) {
    throw new Error("region map is empty");
  }
  const { width, height } = layers[0];
  for (const layer of layers) {
    if (layer.width !== width || layer.height !== height) {
      throw new Error("region map layers disagree on shape");
    }
  }
  const sel = new Uint8Array(width * height);
  for (const name of selection.regions) {
    const layer = regionMap[name].data;
    for (let i = 0; i < sel.length; i++) {
      if (layer[i] > 0.5) sel[i] = 1;
    }
  }
  if (selection.freehand !== undefined) {
    if (selection.freehand.length !== sel.length) {
      throw new Error("freehand selection shape mismatch");
    }
    for (let i = 0; i < sel.length; i++) {
      if (selection.freehand[i]) sel[i] = 1;
    }
  }
  return sel;
}

export interface CombineEntry {
  mask: MaskLayer;
  selection: RegionSelection;
  regionMap: Record<string, MaskLayer>;
}

/**
 * Merge per-reference masks into one: each mask is kept only inside its
 * selection and the layers are reduced with a per-pixel max.
 */
export function combineMasks(entries: CombineEntry[]): MaskLayer {
  if (entries.length === 0) {
    throw new Error("combineMasks needs at least one entry");
  }
  const { width, height } = entries[0].mask;
  for (const e of entries) {
    if (e.mask.width !== width || e.mask.height !== height) {
      throw new Error("masks disagree on shape");
    }
  }
  const out = new Float32Array(width * height);
  for (const e of entries) {
    const sel = selectionPixels(e.selection, e.regionMap);
    if (sel.length !== out.length) {
      throw new Error("selection dimensions do not match mask");
    }
    const m = e.mask.data;
    for (let i = 0; i < out.length; i++) {
      const v = sel[i] ? m[i] : 0;
      if (v > out[i]) out[i] = v;
    }
  }
  return new MaskLayer(width, height, out);
}

/** Zero the mask wherever the selection covers it. */
export function eraseSelection(
  mask: MaskLayer,
  selection: RegionSelection,
  regionMap: Record<string, MaskLayer>
): MaskLayer {
  const sel = selectionPixels(selection, regionMap);
  if (sel.length !== mask.data.length) {
    throw new Error("selection dimensions do not match mask");
  }
  const out = mask.data.slice();
  for (let i = 0; i < out.length; i++) {
    if (sel[i]) out[i] = 0;
  }
  return new MaskLayer(mask.width, mask.height, out);
}

/** Scale mask intensity, clamped back into [0, 1]. */
export function scaleMask(mask: MaskLayer, factor: number): MaskLayer {
  if (factor < 0) {
    throw new Error("scale factor must be >= 0");
  }
  const f = Math.fround(factor);
  const out = new Float32Array(mask.data.length);
  for (let i = 0; i < out.length; i++) {
    out[i] = Math.min(1, Math.max(0, Math.fround(mask.data[i] * f)));
  }
  return new MaskLayer(mask.width, mask.height, out);
}
