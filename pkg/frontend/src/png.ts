/**
 * Minimal PNG codec for the mask editor.
 *
 * The service speaks 8-bit PNGs: grayscale for masks and region layers, RGB
 * for photos and results. Encoding always writes filter 0 rows, so the same
 * pixels always produce the same bytes (the saved-mask byte-identity checks
 * rely on that). Decoding handles all five scanline filters because the
 * server side writes whatever its encoder picks.
 */

import { deflate, inflate } from "pako";

export interface GrayImage {
  width: number;
  height: number;
  data: Uint8Array; // one byte per pixel, row major
}

export interface RgbImage {
  width: number;
  height: number;
  data: Uint8Array; // interleaved r,g,b
}

export interface DecodedPng {
  width: number;
  height: number;
  channels: number;
  data: Uint8Array;
}

const SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function writeU32(target: Uint8Array, offset: number, value: number): void {
  target[offset] = (value >>> 24) & 0xff;
  target[offset + 1] = (value >>> 16) & 0xff;
  target[offset + 2] = (value >>> 8) & 0xff;
  target[offset + 3] = value & 0xff;
}

function readU32(bytes: Uint8Array, offset: number): number {
  return (
    ((bytes[offset] << 24) | (bytes[offset + 1] << 16) | (bytes[offset + 2] << 8) | bytes[offset + 3]) >>> 0
  );
}

function makeChunk(type: string, body: Uint8Array): Uint8Array {
  const chunk = new Uint8Array(12 + body.length);
  writeU32(chunk, 0, body.length);
  for (let i = 0; i < 4; i++) chunk[4 + i] = type.charCodeAt(i);
  chunk.set(body, 8);
  writeU32(chunk, 8 + body.length, crc32(chunk.subarray(4, 8 + body.length)));
  return chunk;
}

export function encodeGrayPng(img: GrayImage): Uint8Array {
  const { width, height, data } = img;
  if (width <= 0 || height <= 0 || !Number.isInteger(width) || !Number.isInteger(height)) {
    throw new Error(`bad image dims ${width}x${height}`);
  }
  if (data.length !== width * height) {
    throw new Error(`pixel buffer length ${data.length} does not match ${width}x${height}`);
  }
  const ihdr = new Uint8Array(13);
  writeU32(ihdr, 0, width);
  writeU32(ihdr, 4, height);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // color type: grayscale
  // compression, filter, interlace stay 0

  // filter byte 0 in front of every row
  const raw = new Uint8Array((width + 1) * height);
  for (let y = 0; y < height; y++) {
    raw.set(data.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  const idat = deflate(raw);

  const chunks = [
    Uint8Array.from(SIGNATURE),
    makeChunk("IHDR", ihdr),
    makeChunk("IDAT", idat),
    makeChunk("IEND", new Uint8Array(0)),
  ];
  const total = chunks.reduce((n, c) => n + c.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const c of chunks) {
    out.set(c, at);
    at += c.length;
  }
  return out;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function decodePng(bytes: Uint8Array): DecodedPng {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG stream");
  }
  let width = 0;
  let height = 0;
  let channels = 0;
  const idatParts: Uint8Array[] = [];
  let at = 8;
  let sawEnd = false;
  while (at + 12 <= bytes.length) {
    const len = readU32(bytes, at);
    const type = String.fromCharCode(bytes[at + 4], bytes[at + 5], bytes[at + 6], bytes[at + 7]);
    const body = bytes.subarray(at + 8, at + 8 + len);
    if (type === "IHDR") {
      width = readU32(body, 0);
      height = readU32(body, 4);
      const depth = body[8];
      const colorType = body[9];
      const interlace = body[12];
      if (depth !== 8) throw new Error(`unsupported bit depth ${depth}`);
      if (interlace !== 0) throw new Error("interlaced PNGs are not supported");
      const byType: Record<number, number> = { 0: 1, 2: 3, 4: 2, 6: 4 };
      if (!(colorType in byType)) throw new Error(`unsupported color type ${colorType}`);
      channels = byType[colorType];
    } else if (type === "IDAT") {
      idatParts.push(body);
    } else if (type === "IEND") {
      sawEnd = true;
      break;
    }
    // ancillary chunks are skipped
    at += 12 + len;
  }
  if (!channels || !sawEnd) throw new Error("truncated or headerless PNG");

  const compressed = new Uint8Array(idatParts.reduce((n, p) => n + p.length, 0));
  let off = 0;
  for (const p of idatParts) {
    compressed.set(p, off);
    off += p.length;
  }
  const raw = inflate(compressed);
  const stride = width * channels;
  if (raw.length !== (stride + 1) * height) {
    throw new Error(`decompressed size ${raw.length} does not match ${width}x${height}x${channels}`);
  }

  const out = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const prev = y > 0 ? out.subarray((y - 1) * stride, y * stride) : null;
    const cur = out.subarray(y * stride, (y + 1) * stride);
    for (let x = 0; x < stride; x++) {
      const a = x >= channels ? cur[x - channels] : 0;
      const b = prev ? prev[x] : 0;
      const c = x >= channels && prev ? prev[x - channels] : 0;
      let v: number;
      switch (filter) {
        case 0:
          v = row[x];
          break;
        case 1:
          v = row[x] + a;
          break;
        case 2:
          v = row[x] + b;
          break;
        case 3:
          v = row[x] + ((a + b) >> 1);
          break;
        case 4:
          v = row[x] + paeth(a, b, c);
          break;
        default:
          throw new Error(`unknown scanline filter ${filter}`);
      }
      cur[x] = v & 0xff;
    }
  }
  return { width, height, channels, data: out };
}

export function decodeGrayPng(bytes: Uint8Array): GrayImage {
  const png = decodePng(bytes);
  if (png.channels !== 1) {
    throw new Error(`expected a grayscale PNG, got ${png.channels} channels`);
  }
  return { width: png.width, height: png.height, data: png.data };
}

export function decodeRgbPng(bytes: Uint8Array): RgbImage {
  const png = decodePng(bytes);
  if (png.channels === 3) {
    return { width: png.width, height: png.height, data: png.data };
  }
  if (png.channels === 1) {
    const rgb = new Uint8Array(png.width * png.height * 3);
    for (let i = 0; i < png.data.length; i++) {
      rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = png.data[i];
    }
    return { width: png.width, height: png.height, data: rgb };
  }
  throw new Error(`expected an RGB or grayscale PNG, got ${png.channels} channels`);
}
