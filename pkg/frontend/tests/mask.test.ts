import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import {
  combineMasks,
  eraseSelection,
  MaskLayer,
  roundHalfToEven,
  scaleMask,
  selectionPixels,
} from "../src/mask.js";
import { decodeGrayPng } from "../src/png.js";

function fixture(name: string): Uint8Array {
  return new Uint8Array(readFileSync(new URL(`./fixtures/${name}`, import.meta.url)));
}

function layerFrom(width: number, height: number, on: (x: number, y: number) => boolean): MaskLayer {
  const data = new Float32Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      data[y * width + x] = on(x, y) ? 1 : 0;
    }
  }
  return new MaskLayer(width, height, data);
}

describe("roundHalfToEven", () => {
  it("matches banker's rounding on ties", () => {
    expect(roundHalfToEven(0.5)).toBe(0);
    expect(roundHalfToEven(1.5)).toBe(2);
    expect(roundHalfToEven(2.5)).toBe(2);
    expect(roundHalfToEven(3.5)).toBe(4);
    expect(roundHalfToEven(127.5)).toBe(128);
    expect(roundHalfToEven(254.5)).toBe(254);
  });

  it("rounds non-ties to the nearest integer", () => {
    expect(roundHalfToEven(2.4999)).toBe(2);
    expect(roundHalfToEven(2.5001)).toBe(3);
    expect(roundHalfToEven(0)).toBe(0);
    expect(roundHalfToEven(255)).toBe(255);
  });
});

describe("MaskLayer", () => {
  it("quantization is the identity on 8-bit grid values", () => {
    // the same float32 grid the backend uses: k/255 for every byte k
    const data = new Float32Array(256);
    for (let k = 0; k < 256; k++) data[k] = Math.fround(k / 255);
    const layer = new MaskLayer(16, 16, data);
    const q = layer.quantized();
    for (let k = 0; k < 256; k++) expect(q[k]).toBe(k);
  });

  it("png round trip preserves quantized pixels and bytes", () => {
    const data = new Float32Array(64);
    for (let i = 0; i < 64; i++) data[i] = Math.fround((i * 4) / 255);
    const layer = new MaskLayer(8, 8, data);
    const png = layer.toPngBytes();
    const back = MaskLayer.fromPngBytes(png);
    expect(back.data).toEqual(layer.data);
    expect(back.toPngBytes()).toEqual(png);
  });

  it("rejects out-of-range values and bad dims", () => {
    expect(() => new MaskLayer(2, 2, Float32Array.from([0, 0.5, 1, 1.2]))).toThrow(/\[0, 1\]/);
    expect(() => new MaskLayer(2, 2, Float32Array.from([0, -0.1, 1, 1]))).toThrow(/\[0, 1\]/);
    expect(() => new MaskLayer(3, 2, new Float32Array(4))).toThrow(/does not match/);
  });
});

describe("selectionPixels", () => {
  const regionMap = {
    lips: layerFrom(4, 4, (x, y) => y < 2 && x < 2),
    eyes: layerFrom(4, 4, (x, y) => y >= 2 && x >= 2),
    skin: layerFrom(4, 4, () => false),
    other: layerFrom(4, 4, () => false),
  };

  it("unions the chosen layers", () => {
    const sel = selectionPixels({ regions: ["lips", "eyes"] }, regionMap);
    let count = 0;
    for (const v of sel) count += v;
    expect(count).toBe(8);
    expect(sel[0]).toBe(1); // (0,0) lips
    expect(sel[15]).toBe(1); // (3,3) eyes
    expect(sel[3]).toBe(0); // (3,0) neither
  });

  it("freehand pixels extend the selection", () => {
    const freehand = new Uint8Array(16);
    freehand[3] = 1;
    const sel = selectionPixels({ regions: ["lips"], freehand }, regionMap);
    expect(sel[3]).toBe(1);
    expect(sel[0]).toBe(1);
  });

  it("validates region names, presence and shapes", () => {
    expect(() => selectionPixels({ regions: ["nose"] }, regionMap)).toThrow(/unknown region/);
    const partial = { lips: regionMap.lips };
    expect(() => selectionPixels({ regions: ["eyes"] }, partial)).toThrow(/lacks layer/);
    const lopsided = { ...regionMap, other: layerFrom(3, 3, () => false) };
    expect(() => selectionPixels({ regions: ["lips"] }, lopsided)).toThrow(/disagree/);
    const freehand = new Uint8Array(9);
    expect(() => selectionPixels({ regions: ["lips"], freehand }, regionMap)).toThrow(/freehand/);
  });
});

describe("combine and erase", () => {
  const regionMap = {
    lips: layerFrom(4, 4, (x, y) => y < 2),
    eyes: layerFrom(4, 4, (x, y) => y >= 2),
    skin: layerFrom(4, 4, () => false),
    other: layerFrom(4, 4, () => false),
  };

  it("takes the per-pixel max inside each selection", () => {
    const a = layerFrom(4, 4, () => true); // all ones
    const bData = new Float32Array(16).fill(0.25);
    const b = new MaskLayer(4, 4, bData);
    const out = combineMasks([
      { mask: a, selection: { regions: ["lips"] }, regionMap },
      { mask: b, selection: { regions: ["lips", "eyes"] }, regionMap },
    ]);
    // top half: max(1, 0.25) = 1; bottom half: only b contributes
    for (let i = 0; i < 8; i++) expect(out.data[i]).toBe(1);
    for (let i = 8; i < 16; i++) expect(out.data[i]).toBeCloseTo(0.25, 7);
  });

  it("pixels outside every selection stay zero", () => {
    const a = layerFrom(4, 4, () => true);
    const out = combineMasks([{ mask: a, selection: { regions: ["lips"] }, regionMap }]);
    for (let i = 8; i < 16; i++) expect(out.data[i]).toBe(0);
  });

  it("matches the backend on the recorded fixture case", () => {
    const maskA = MaskLayer.fromPngBytes(fixture("combine_mask_a.png"));
    const maskB = MaskLayer.fromPngBytes(fixture("combine_mask_b.png"));
    const regions: Record<string, MaskLayer> = {};
    for (const name of ["lips", "eyes", "skin", "other"]) {
      regions[name] = MaskLayer.fromPngBytes(fixture(`region_${name}.png`));
    }
    const combined = combineMasks([
      { mask: maskA, selection: { regions: ["lips"] }, regionMap: regions },
      { mask: maskB, selection: { regions: ["eyes", "skin"] }, regionMap: regions },
    ]);
    const expected = decodeGrayPng(fixture("combine_expected.png"));
    expect(combined.quantized()).toEqual(expected.data);
  });

  it("rejects empty input and mismatched shapes", () => {
    expect(() => combineMasks([])).toThrow(/at least one/);
    const small = MaskLayer.zeros(3, 3);
    const big = MaskLayer.zeros(4, 4);
    expect(() =>
      combineMasks([
        { mask: big, selection: { regions: ["lips"] }, regionMap },
        { mask: small, selection: { regions: ["eyes"] }, regionMap },
      ])
    ).toThrow(/disagree on shape/);
    expect(() => combineMasks([{ mask: small, selection: { regions: ["lips"] }, regionMap }])).toThrow(
      /do not match/
    );
  });

  it("erase zeroes the selection and nothing else", () => {
    const data = new Float32Array(16);
    for (let i = 0; i < 16; i++) data[i] = Math.fround(i / 16);
    const mask = new MaskLayer(4, 4, data);
    const out = eraseSelection(mask, { regions: ["lips"] }, regionMap);
    for (let i = 0; i < 8; i++) expect(out.data[i]).toBe(0);
    for (let i = 8; i < 16; i++) expect(out.data[i]).toBe(mask.data[i]);
    // input untouched
    expect(mask.data[0]).toBe(0);
    expect(mask.data[1]).toBeGreaterThan(0);
  });
});

describe("scaleMask", () => {
  it("scales and clamps", () => {
    const mask = new MaskLayer(1, 3, Float32Array.from([0.2, 0.5, 0.9]));
    const doubled = scaleMask(mask, 2);
    expect(doubled.data[0]).toBeCloseTo(0.4, 6);
    expect(doubled.data[1]).toBe(1);
    expect(doubled.data[2]).toBe(1);
    const halved = scaleMask(mask, 0.5);
    expect(halved.data[0]).toBeCloseTo(0.1, 6);
  });

  it("rejects negative factors", () => {
    expect(() => scaleMask(MaskLayer.zeros(2, 2), -1)).toThrow(/>= 0/);
  });
});
