import { ServiceClient, ServiceError } from "./api.js";
import type { Candidate, Point, Preview, SaliencyGrid } from "./types.js";

export type Phase = "empty" | "loading" | "ready" | "error";

export interface PickerState {
  phase: Phase;
  imageId: string | null;
  imageSize: { w: number; h: number } | null;
  candidates: Candidate[];
  symmetric: boolean;
  saliency: SaliencyGrid | null;
  /** The point the user picked (marker or arbitrary); null before any pick. */
  selected: Point | null;
  /** Crop previews for `previewsFor`; every rect originated from the service. */
  previews: Preview[];
  previewsFor: Point | null;
  previewsPending: boolean;
  confirmed: boolean;
  error: string | null;
}

function initialState(): PickerState {
  return {
    phase: "empty",
    imageId: null,
    imageSize: null,
    candidates: [],
    symmetric: false,
    saliency: null,
    selected: null,
    previews: [],
    previewsFor: null,
    previewsPending: false,
    confirmed: false,
    error: null,
  };
}

export type Listener = (state: PickerState) => void;

/**
 * UI-framework-free store for the picker.
 *
 * Invariant: `previews` always belongs to `previewsFor`, and `previewsFor`
 * only ever becomes the currently selected point. Candidate picks reuse the
 * preview rects the service attached to the candidate (zero extra round
 * trips); arbitrary picks post the selection and re-fetch one crop per
 * aspect ratio. In-flight pick requests are aborted and epoch-checked, so a
 * slow older pick can never overwrite a newer one with stale previews.
 */
export class PickerStore {
  state: PickerState = initialState();

  private listeners = new Set<Listener>();
  private pickEpoch = 0;
  private inflight: AbortController | null = null;

  constructor(
    private readonly api: ServiceClient,
    readonly ars: string[] = ["1:1", "16:9", "4:5"],
    readonly k: number = 3,
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    listener(this.state);
    return () => this.listeners.delete(listener);
  }

  private set(patch: Partial<PickerState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Upload an image, then load its candidates and saliency grid. */
  async upload(data: Blob | ArrayBuffer | Uint8Array): Promise<void> {
    this.cancelInflight();
    this.set({ ...initialState(), phase: "loading" });
    try {
      const imageId = await this.api.upload(data);
      const [cands, saliency] = await Promise.all([
        this.api.candidates(imageId, this.k, this.ars),
        this.api.saliency(imageId),
      ]);
      this.set({
        phase: "ready",
        imageId,
        imageSize: { w: saliency.source_w, h: saliency.source_h },
        candidates: cands.candidates,
        symmetric: cands.symmetric,
        saliency,
      });
    } catch (err) {
      this.set({ phase: "error", error: describe(err) });
    }
  }

  /**
   * Pick one of the ranked candidate markers. The previews shipped with the
   * candidate are service geometry already, so they apply immediately.
   */
  pickCandidate(index: number): void {
    const candidate = this.state.candidates[index];
    if (this.state.phase !== "ready" || !candidate) return;
    this.pickEpoch += 1;
    this.cancelInflight();
    this.set({
      selected: candidate.point,
      previews: candidate.previews,
      previewsFor: candidate.point,
      previewsPending: false,
      confirmed: false,
      error: null,
    });
  }

  /**
   * Pick an arbitrary focal point. Clicks outside the image are ignored.
   * The point is posted as the session selection, then one crop per aspect
   * ratio is fetched so the previews are the service's geometry for it.
   */
  async pickPoint(point: Point): Promise<void> {
    const { imageId, imageSize, phase } = this.state;
    if (phase !== "ready" || !imageId || !imageSize) return;
    if (point.x < 0 || point.y < 0 || point.x >= imageSize.w || point.y >= imageSize.h) {
      return; // out-of-image clicks are ignored
    }
    const epoch = ++this.pickEpoch;
    this.cancelInflight();
    const controller = new AbortController();
    this.inflight = controller;
    this.set({
      selected: point,
      previews: [],
      previewsFor: null,
      previewsPending: true,
      confirmed: false,
      error: null,
    });
    try {
      await this.api.select(imageId, point, controller.signal);
      const crops = await Promise.all(
        this.ars.map((ar) => this.api.crop(imageId, ar, controller.signal)),
      );
      if (epoch !== this.pickEpoch) return; // a newer pick won
      this.set({
        previews: crops.map((c) => ({ ar: c.ar, rect: c.rect })),
        previewsFor: point,
        previewsPending: false,
      });
    } catch (err) {
      if (epoch !== this.pickEpoch || controller.signal.aborted) return;
      this.set({ previewsPending: false, error: describe(err) });
    }
  }

  /**
   * Persist the current pick as the session selection. On failure the pick
   * is kept so the user can simply retry.
   */
  async confirm(): Promise<void> {
    const { imageId, selected } = this.state;
    if (!imageId || !selected || this.state.confirmed) return;
    try {
      await this.api.select(imageId, selected);
      this.set({ confirmed: true, error: null });
    } catch (err) {
      this.set({ confirmed: false, error: `confirm failed, retry: ${describe(err)}` });
    }
  }

  get canConfirm(): boolean {
    return this.state.phase === "ready" && this.state.selected !== null
      && !this.state.confirmed;
  }

  private cancelInflight(): void {
    this.inflight?.abort();
    this.inflight = null;
  }
}

function describe(err: unknown): string {
  if (err instanceof ServiceError) {
    if (err.status === 413) return "image too large for the service";
    if (err.status === 400) return `rejected: ${err.message}`;
    return `service error ${err.status}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}
