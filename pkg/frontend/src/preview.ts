/**
 * Debounced live preview: edits are coalesced into at most one request per
 * quiet period, only one request is ever in flight, and responses that no
 * longer match the current document hash are dropped. Network events never
 * mutate the document.
 */

import { CanvasDocument } from "./document.js";
import { BuiltRequest, buildRequest } from "./request.js";

export interface SynthesisResponseJson {
  image: string;
  latency_ms: number;
  total_ms: number;
  model_id: string;
  request_hash: string;
}

export interface PreviewTransport {
  send(built: BuiltRequest): Promise<SynthesisResponseJson>;
}

export interface PreviewCallbacks {
  onPreview(image: string, response: SynthesisResponseJson): void;
  onError(message: string): void;
}

export interface TimerHooks {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const defaultTimers: TimerHooks = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export interface PreviewState {
  lastRequestHash: string | null;
  lastResponseImage: string | null;
  inFlight: boolean;
  timerPending: boolean;
}

export class PreviewScheduler {
  readonly state: PreviewState = {
    lastRequestHash: null,
    lastResponseImage: null,
    inFlight: false,
    timerPending: false,
  };
  requestsSent = 0;

  private timerHandle: unknown = null;

  constructor(
    private readonly doc: CanvasDocument,
    private readonly modelId: string,
    private readonly transport: PreviewTransport,
    private readonly callbacks: PreviewCallbacks,
    private readonly debounceMs: number = 150,
    private readonly timers: TimerHooks = defaultTimers,
  ) {}

  /** Call on every edit; restarts the quiet-period timer. */
  noteEdit(): void {
    if (this.timerHandle !== null) this.timers.clear(this.timerHandle);
    this.state.timerPending = true;
    this.timerHandle = this.timers.set(() => {
      this.timerHandle = null;
      this.state.timerPending = false;
      this.fire();
    }, this.debounceMs);
  }

  private fire(): void {
    if (this.state.inFlight) return; // completion handler reschedules if needed
    const built = buildRequest(this.doc, this.modelId);
    if (built.hash === this.state.lastRequestHash && this.state.lastResponseImage !== null) {
      return; // nothing changed since the last rendered preview
    }
    this.state.inFlight = true;
    this.state.lastRequestHash = built.hash;
    this.requestsSent += 1;
    this.transport.send(built).then(
      (response) => {
        this.state.inFlight = false;
        const current = buildRequest(this.doc, this.modelId).hash;
        if (current !== built.hash) {
          this.noteEdit(); // stale: drop and chase the newer document state
          return;
        }
        this.state.lastResponseImage = response.image;
        this.callbacks.onPreview(response.image, response);
      },
      (err) => {
        this.state.inFlight = false;
        this.callbacks.onError(String(err));
      },
    );
  }
}
