import { z } from "zod";

import type {
  Candidate,
  CandidatesResponse,
  CropResponse,
  Point,
  SaliencyGrid,
} from "./types.js";

const pointSchema = z.object({ x: z.number(), y: z.number() });
const rectSchema = z.object({
  x: z.number(),
  y: z.number(),
  w: z.number(),
  h: z.number(),
});
const previewSchema = z.object({ ar: z.string(), rect: rectSchema });
const candidateSchema = z.object({
  point: pointSchema,
  score: z.number(),
  previews: z.array(previewSchema),
});
const candidatesSchema = z.object({
  candidates: z.array(candidateSchema),
  symmetric: z.boolean(),
});
const saliencySchema = z.object({
  grid_w: z.number().int().positive(),
  grid_h: z.number().int().positive(),
  source_w: z.number().int().positive(),
  source_h: z.number().int().positive(),
  scores: z.array(z.array(z.number())),
});
const cropSchema = z.object({
  ar: z.string(),
  rect: rectSchema,
  focal: pointSchema,
  selected: z.boolean(),
});
const uploadSchema = z.object({ image_id: z.string().min(1) });

/** A service response the UI should explain to the user, not crash on. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

async function parseJson<T>(resp: Response, schema: z.ZodType<T>): Promise<T> {
  if (!resp.ok) {
    let detail = `${resp.status}`;
    try {
      const body = (await resp.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      /* non-JSON error body: keep the status text */
    }
    throw new ServiceError(resp.status, detail);
  }
  return schema.parse(await resp.json());
}

/**
 * Typed client for the crop service. All crop geometry the UI ever shows
 * comes back from these calls; nothing is recomputed client side.
 */
export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async upload(data: Blob | ArrayBuffer | Uint8Array): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/images`, {
      method: "POST",
      body: data as BodyInit,
    });
    const body = await parseJson(resp, uploadSchema);
    return body.image_id;
  }

  async candidates(
    imageId: string,
    k: number,
    ars: string[],
    signal?: AbortSignal,
  ): Promise<CandidatesResponse> {
    const params = new URLSearchParams({ k: String(k), ars: ars.join(",") });
    const resp = await this.fetchFn(
      `${this.baseUrl}/images/${imageId}/candidates?${params}`,
      { signal },
    );
    return parseJson(resp, candidatesSchema);
  }

  async saliency(imageId: string, signal?: AbortSignal): Promise<SaliencyGrid> {
    const resp = await this.fetchFn(`${this.baseUrl}/images/${imageId}/saliency`, {
      signal,
    });
    return parseJson(resp, saliencySchema);
  }

  async select(imageId: string, point: Point, signal?: AbortSignal): Promise<void> {
    const resp = await this.fetchFn(`${this.baseUrl}/images/${imageId}/selection`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(point),
      signal,
    });
    if (!resp.ok) {
      throw new ServiceError(resp.status, `selection rejected (${resp.status})`);
    }
  }

  async crop(imageId: string, ar: string, signal?: AbortSignal): Promise<CropResponse> {
    const params = new URLSearchParams({ ar, format: "json" });
    const resp = await this.fetchFn(
      `${this.baseUrl}/images/${imageId}/crop?${params}`,
      { signal },
    );
    return parseJson(resp, cropSchema);
  }
}

export type { Candidate, CandidatesResponse, CropResponse, SaliencyGrid };
