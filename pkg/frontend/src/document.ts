/**
 * Canvas document model, headless so it tests without a DOM.
 *
 * The sketch layer is an 8-bit grayscale raster (255 = white paper); the
 * stroke layer stays vector until the server rasterizes it with the
 * canonical rule. Pen and eraser stamp round caps into the raster; scribble
 * appends points to a color stroke. Each completed gesture pushes exactly
 * one undo entry, and undo -> redo restores the document bit-for-bit.
 */

import { Stroke, cloneStroke } from "./strokes.js";

export type Mode = "sketch2photo" | "sketch_strokes" | "colorization";
export type Tool = "pen" | "eraser" | "scribble";

export interface BrushState {
  tool: Tool;
  color: [number, number, number];
  width: number;
}

export interface PointerEventLike {
  kind: "down" | "move" | "up";
  x: number;
  y: number;
}

interface RasterDelta {
  kind: "raster";
  indices: number[];
  before: Uint8Array;
  after: Uint8Array;
}

interface StrokeAddDelta {
  kind: "stroke-add";
  stroke: Stroke;
}

export type DocumentDelta = RasterDelta | StrokeAddDelta;

interface ActiveGesture {
  tool: Tool;
  lastX: number;
  lastY: number;
  touched: Map<number, number>; // pixel index -> original value
  stroke: Stroke | null;
}

export interface CanvasDocument {
  size: number;
  mode: Mode;
  sketch: Uint8Array;
  strokes: Stroke[];
  brush: BrushState;
  undoStack: DocumentDelta[];
  redoStack: DocumentDelta[];
  active: ActiveGesture | null;
}

export function createDocument(size: number, mode: Mode = "sketch_strokes"): CanvasDocument {
  return {
    size,
    mode,
    sketch: new Uint8Array(size * size).fill(255),
    strokes: [],
    brush: { tool: "pen", color: [0, 0, 0], width: 4 },
    undoStack: [],
    redoStack: [],
    active: null,
  };
}

function stampCapsule(doc: CanvasDocument, gesture: ActiveGesture, x0: number, y0: number, x1: number, y1: number, value: number): void {
  const r = doc.brush.width / 2;
  const size = doc.size;
  const minX = Math.max(0, Math.floor(Math.min(x0, x1) - r - 1));
  const maxX = Math.min(size - 1, Math.ceil(Math.max(x0, x1) + r + 1));
  const minY = Math.max(0, Math.floor(Math.min(y0, y1) - r - 1));
  const maxY = Math.min(size - 1, Math.ceil(Math.max(y0, y1) + r + 1));
  const vx = x1 - x0;
  const vy = y1 - y0;
  const denom = vx * vx + vy * vy;
  for (let py = minY; py <= maxY; py++) {
    for (let px = minX; px <= maxX; px++) {
      const t = denom === 0 ? 0 : Math.max(0, Math.min(1, ((px - x0) * vx + (py - y0) * vy) / denom));
      const dx = px - (x0 + t * vx);
      const dy = py - (y0 + t * vy);
      if (dx * dx + dy * dy <= r * r) {
        const idx = py * size + px;
        if (doc.sketch[idx] !== value) {
          if (!gesture.touched.has(idx)) gesture.touched.set(idx, doc.sketch[idx]);
          doc.sketch[idx] = value;
        }
      }
    }
  }
}

function clampToCanvas(doc: CanvasDocument, x: number, y: number): [number, number] {
  return [Math.max(0, Math.min(doc.size - 1, x)), Math.max(0, Math.min(doc.size - 1, y))];
}

/** Apply one pointer event; a down..up sequence forms a single gesture. */
export function applyBrushEvent(doc: CanvasDocument, ev: PointerEventLike): CanvasDocument {
  const [x, y] = clampToCanvas(doc, ev.x, ev.y);
  if (ev.kind === "down") {
    const gesture: ActiveGesture = { tool: doc.brush.tool, lastX: x, lastY: y, touched: new Map(), stroke: null };
    if (gesture.tool === "scribble") {
      gesture.stroke = { points: [[x, y]], color: [...doc.brush.color], width: doc.brush.width };
    } else {
      stampCapsule(doc, gesture, x, y, x, y, gesture.tool === "pen" ? 0 : 255);
    }
    doc.active = gesture;
    return doc;
  }
  const gesture = doc.active;
  if (!gesture) return doc;
  if (ev.kind === "move" || ev.kind === "up") {
    if (gesture.stroke) {
      if (x !== gesture.lastX || y !== gesture.lastY) gesture.stroke.points.push([x, y]);
    } else {
      stampCapsule(doc, gesture, gesture.lastX, gesture.lastY, x, y, gesture.tool === "pen" ? 0 : 255);
    }
    gesture.lastX = x;
    gesture.lastY = y;
  }
  if (ev.kind === "up") {
    finishGesture(doc, gesture);
    doc.active = null;
  }
  return doc;
}

function finishGesture(doc: CanvasDocument, gesture: ActiveGesture): void {
  if (gesture.stroke) {
    doc.strokes.push(gesture.stroke);
    doc.undoStack.push({ kind: "stroke-add", stroke: cloneStroke(gesture.stroke) });
    doc.redoStack.length = 0;
    return;
  }
  if (gesture.touched.size === 0) return; // no-op gesture: no undo entry
  const indices = Array.from(gesture.touched.keys()).sort((a, b) => a - b);
  const before = new Uint8Array(indices.length);
  const after = new Uint8Array(indices.length);
  indices.forEach((idx, i) => {
    before[i] = gesture.touched.get(idx)!;
    after[i] = doc.sketch[idx];
  });
  doc.undoStack.push({ kind: "raster", indices, before, after });
  doc.redoStack.length = 0;
}

export function undo(doc: CanvasDocument): boolean {
  const delta = doc.undoStack.pop();
  if (!delta) return false;
  if (delta.kind === "raster") {
    delta.indices.forEach((idx, i) => {
      doc.sketch[idx] = delta.before[i];
    });
  } else {
    doc.strokes.pop();
  }
  doc.redoStack.push(delta);
  return true;
}

export function redo(doc: CanvasDocument): boolean {
  const delta = doc.redoStack.pop();
  if (!delta) return false;
  if (delta.kind === "raster") {
    delta.indices.forEach((idx, i) => {
      doc.sketch[idx] = delta.after[i];
    });
  } else {
    doc.strokes.push(cloneStroke(delta.stroke));
  }
  doc.undoStack.push(delta);
  return true;
}
