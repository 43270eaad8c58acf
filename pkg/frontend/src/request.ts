/**
 * Builds synthesis requests from a document: the sketch travels as a
 * lossless PNG, strokes stay vector JSON. The request hash (mode, image
 * bytes, canonical strokes JSON, size) keys debounce/staleness decisions;
 * the server computes its own echo hash with the same recipe server-side.
 */

import { CanvasDocument } from "./document.js";
import { bytesToBase64, encodePngGray } from "./png.js";
import { sha256Hex } from "./sha256.js";
import { serializeStrokeSet, StrokeSetJson, strokeSetToJson } from "./strokes.js";

export interface SynthesisRequestJson {
  mode: string;
  image: string;
  strokes?: StrokeSetJson;
  model_id: string;
  output_size: number;
}

export interface BuiltRequest {
  request: SynthesisRequestJson;
  body: string;
  hash: string;
}

export function buildRequest(doc: CanvasDocument, modelId: string): BuiltRequest {
  const image = bytesToBase64(encodePngGray(doc.size, doc.size, doc.sketch));
  const request: SynthesisRequestJson = { mode: doc.mode, image, model_id: modelId, output_size: doc.size };
  let strokesCanonical = "";
  if (doc.strokes.length > 0) {
    request.strokes = strokeSetToJson(doc.strokes);
    strokesCanonical = serializeStrokeSet(doc.strokes);
  }
  const hash = sha256Hex([doc.mode, image, strokesCanonical, String(doc.size)].join("\n"));
  return { request, body: serializeRequest(request), hash };
}

/** Canonical byte form: fixed key order, no whitespace. */
export function serializeRequest(request: SynthesisRequestJson): string {
  const ordered: Record<string, unknown> = { mode: request.mode, image: request.image };
  if (request.strokes !== undefined) ordered.strokes = request.strokes;
  ordered.model_id = request.model_id;
  ordered.output_size = request.output_size;
  return JSON.stringify(ordered);
}
