/**
 * Document bundles: {sketch PNG + StrokeSet JSON}, the UI's export/import
 * format. Import only understands PNGs written by this package's encoder
 * (grayscale, filter 0, stored deflate blocks), which is all a round-trip
 * needs.
 */

import { CanvasDocument, Mode, createDocument } from "./document.js";
import { bytesToBase64, encodePngGray } from "./png.js";
import { StrokeSetJson, strokeSetToJson } from "./strokes.js";

export interface DocumentBundle {
  mode: Mode;
  size: number;
  sketch_png_base64: string;
  strokes: StrokeSetJson;
}

export function exportDocument(doc: CanvasDocument): DocumentBundle {
  return {
    mode: doc.mode,
    size: doc.size,
    sketch_png_base64: bytesToBase64(encodePngGray(doc.size, doc.size, doc.sketch)),
    strokes: strokeSetToJson(doc.strokes),
  };
}

export function base64ToBytes(text: string): Uint8Array {
  const clean = text.replace(/=+$/, "");
  const out: number[] = [];
  let buffer = 0;
  let bits = 0;
  const alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  for (const ch of clean) {
    buffer = (buffer << 6) | alphabet.indexOf(ch);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push((buffer >> bits) & 0xff);
    }
  }
  return new Uint8Array(out);
}

function readUint32(bytes: Uint8Array, off: number): number {
  return ((bytes[off] << 24) | (bytes[off + 1] << 16) | (bytes[off + 2] << 8) | bytes[off + 3]) >>> 0;
}

/** Decode a PNG produced by encodePngGray back into (size, pixels). */
export function decodePngGrayStored(png: Uint8Array): { width: number; height: number; pixels: Uint8Array } {
  let off = 8; // signature
  let width = 0;
  let height = 0;
  const idat: number[] = [];
  while (off < png.length) {
    const len = readUint32(png, off);
    const type = String.fromCharCode(png[off + 4], png[off + 5], png[off + 6], png[off + 7]);
    const data = png.subarray(off + 8, off + 8 + len);
    if (type === "IHDR") {
      width = readUint32(data, 0);
      height = readUint32(data, 4);
      if (data[8] !== 8 || data[9] !== 0) throw new Error("only 8-bit grayscale supported");
    } else if (type === "IDAT") {
      idat.push(...data);
    }
    off += 12 + len;
  }
  const z = new Uint8Array(idat);
  const raw: number[] = [];
  let p = 2; // zlib header
  for (;;) {
    const final = z[p] & 1;
    if ((z[p] >> 1) & 3) throw new Error("only stored deflate blocks supported");
    const len = z[p + 1] | (z[p + 2] << 8);
    p += 5;
    for (let i = 0; i < len; i++) raw.push(z[p + i]);
    p += len;
    if (final) break;
  }
  const pixels = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    if (raw[y * (width + 1)] !== 0) throw new Error("only filter 0 supported");
    for (let x = 0; x < width; x++) pixels[y * width + x] = raw[y * (width + 1) + 1 + x];
  }
  return { width, height, pixels };
}

export function importDocument(bundle: DocumentBundle): CanvasDocument {
  const { width, height, pixels } = decodePngGrayStored(base64ToBytes(bundle.sketch_png_base64));
  if (width !== bundle.size || height !== bundle.size) {
    throw new Error(`bundle size ${bundle.size} does not match PNG ${width}x${height}`);
  }
  const doc = createDocument(bundle.size, bundle.mode);
  doc.sketch.set(pixels);
  doc.strokes = bundle.strokes.strokes.map((s) => ({
    points: s.points.map(([x, y]) => [x, y] as [number, number]),
    color: [s.color[0], s.color[1], s.color[2]] as [number, number, number],
    width: s.width,
  }));
  return doc;
}
