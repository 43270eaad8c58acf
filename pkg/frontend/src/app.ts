/**
 * Browser wiring: a drawing canvas on the left, the live synthesized
 * preview on the right. All document logic lives in the headless modules;
 * this file only translates DOM events and paints pixels.
 */

import { applyBrushEvent, CanvasDocument, createDocument, Mode, redo, Tool, undo } from "./document.js";
import { PreviewScheduler } from "./preview.js";
import { buildRequest } from "./request.js";

const CANVAS_SIZE = 256;

function paintDocument(doc: CanvasDocument, ctx: CanvasRenderingContext2D): void {
  const img = ctx.createImageData(doc.size, doc.size);
  for (let i = 0; i < doc.sketch.length; i++) {
    const v = doc.sketch[i];
    img.data[i * 4] = v;
    img.data[i * 4 + 1] = v;
    img.data[i * 4 + 2] = v;
    img.data[i * 4 + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
  // local stroke preview only; the server rasterizes the canonical version
  for (const s of doc.strokes) {
    ctx.strokeStyle = `rgb(${s.color.map((c) => Math.round(c * 255)).join(",")})`;
    ctx.lineWidth = s.width;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    ctx.moveTo(s.points[0][0], s.points[0][1]);
    for (const [x, y] of s.points.slice(1)) ctx.lineTo(x, y);
    ctx.stroke();
  }
}

export function mountStudio(root: HTMLElement, serverUrl: string, modelId: string): void {
  const doc = createDocument(CANVAS_SIZE);
  root.innerHTML = `
    <div style="display:flex;gap:12px;font-family:sans-serif">
      <div>
        <canvas id="draw" width="${CANVAS_SIZE}" height="${CANVAS_SIZE}" style="border:1px solid #888;touch-action:none"></canvas>
        <div>
          <button data-tool="pen">pen</button>
          <button data-tool="eraser">eraser</button>
          <button data-tool="scribble">scribble</button>
          <input id="color" type="color" value="#cc3322">
          <input id="width" type="range" min="1" max="16" value="4">
          <button id="undo">undo</button>
          <button id="redo">redo</button>
          <select id="mode">
            <option value="sketch_strokes">sketch + strokes</option>
            <option value="sketch2photo">sketch only</option>
            <option value="colorization">colorization</option>
          </select>
        </div>
      </div>
      <div>
        <img id="preview" width="${CANVAS_SIZE}" height="${CANVAS_SIZE}" style="border:1px solid #888">
        <div id="latency"></div>
        <div id="toast" style="color:#a33"></div>
      </div>
    </div>`;

  const canvas = root.querySelector<HTMLCanvasElement>("#draw")!;
  const ctx = canvas.getContext("2d")!;
  const preview = root.querySelector<HTMLImageElement>("#preview")!;
  const latency = root.querySelector<HTMLElement>("#latency")!;
  const toast = root.querySelector<HTMLElement>("#toast")!;

  const scheduler = new PreviewScheduler(
    doc,
    modelId,
    {
      async send(built) {
        const resp = await fetch(`${serverUrl}/v1/synthesize`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: built.body,
        });
        if (!resp.ok) throw new Error(`server ${resp.status}`);
        return resp.json();
      },
    },
    {
      onPreview(image, response) {
        preview.src = `data:image/png;base64,${image}`;
        latency.textContent = `${response.latency_ms.toFixed(1)} ms forward / ${response.total_ms.toFixed(1)} ms total`;
        toast.textContent = "";
      },
      onError(message) {
        toast.textContent = message; // non-blocking; document untouched
      },
    },
  );

  const repaint = () => paintDocument(doc, ctx);
  const edited = () => {
    repaint();
    scheduler.noteEdit();
  };

  let drawing = false;
  const position = (ev: PointerEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    return [ev.clientX - rect.left, ev.clientY - rect.top];
  };
  canvas.addEventListener("pointerdown", (ev) => {
    drawing = true;
    const [x, y] = position(ev);
    applyBrushEvent(doc, { kind: "down", x, y });
    repaint();
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!drawing) return;
    const [x, y] = position(ev);
    applyBrushEvent(doc, { kind: "move", x, y });
    repaint();
  });
  window.addEventListener("pointerup", (ev) => {
    if (!drawing) return;
    drawing = false;
    const [x, y] = position(ev as PointerEvent);
    applyBrushEvent(doc, { kind: "up", x, y });
    edited();
  });

  root.querySelectorAll<HTMLButtonElement>("[data-tool]").forEach((btn) => {
    btn.addEventListener("click", () => {
      doc.brush.tool = btn.dataset.tool as Tool;
    });
  });
  root.querySelector<HTMLInputElement>("#color")!.addEventListener("input", (ev) => {
    const hex = (ev.target as HTMLInputElement).value;
    doc.brush.color = [1, 3, 5].map((i) => parseInt(hex.slice(i, i + 2), 16) / 255) as [number, number, number];
  });
  root.querySelector<HTMLInputElement>("#width")!.addEventListener("input", (ev) => {
    doc.brush.width = Number((ev.target as HTMLInputElement).value);
  });
  root.querySelector<HTMLButtonElement>("#undo")!.addEventListener("click", () => {
    if (undo(doc)) edited();
  });
  root.querySelector<HTMLButtonElement>("#redo")!.addEventListener("click", () => {
    if (redo(doc)) edited();
  });
  root.querySelector<HTMLSelectElement>("#mode")!.addEventListener("change", (ev) => {
    doc.mode = (ev.target as HTMLSelectElement).value as Mode;
    edited();
  });

  repaint();
  void buildRequest; // exported for debugging consoles
}

declare global {
  interface Window {
    mountStudio?: typeof mountStudio;
  }
}
if (typeof window !== "undefined") {
  window.mountStudio = mountStudio;
}
