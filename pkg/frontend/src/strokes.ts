/**
 * Vector color strokes, matching the server's StrokeSet JSON schema:
 * {"strokes": [{"points": [[x, y], ...], "color": [r, g, b], "width": w}]}
 * Coordinates are pixel centers; colors are RGB in [0, 1].
 */

export interface Stroke {
  points: Array<[number, number]>;
  color: [number, number, number];
  width: number;
}

export interface StrokeSetJson {
  strokes: Array<{ points: number[][]; color: number[]; width: number }>;
}

export function strokeSetToJson(strokes: Stroke[]): StrokeSetJson {
  return {
    strokes: strokes.map((s) => ({
      points: s.points.map(([x, y]) => [x, y]),
      color: [s.color[0], s.color[1], s.color[2]],
      width: s.width,
    })),
  };
}

/** Compact canonical serialization (stable key order, no whitespace). */
export function serializeStrokeSet(strokes: Stroke[]): string {
  return JSON.stringify(strokeSetToJson(strokes));
}

export function cloneStroke(s: Stroke): Stroke {
  return {
    points: s.points.map(([x, y]) => [x, y] as [number, number]),
    color: [s.color[0], s.color[1], s.color[2]],
    width: s.width,
  };
}
