/** Typed client for the generation HTTP API (/health, /models, /generate). */

import { z } from "zod";

export const modelInfoSchema = z.object({
  model_id: z.string(),
  p_train: z.number(),
  epochs: z.number().int(),
  seed: z.number().int(),
  latent_dim: z.number().int(),
  image_hw: z.number().int(),
});
export type ModelInfo = z.infer<typeof modelInfoSchema>;

export const variantSchema = z.object({
  index: z.number().int(),
  mask_seed: z.number().int().nullable(),
  png_base64: z.string().min(1),
});
export type Variant = z.infer<typeof variantSchema>;

export const generateResponseSchema = z.object({
  model_id: z.string(),
  seed: z.number().int(),
  p_dropout: z.number(),
  p_scale: z.number(),
  placement: z.enum(["all", "first"]),
  variants: z.array(variantSchema).min(1),
});
export type GenerateResponse = z.infer<typeof generateResponseSchema>;

export interface GenerateRequestBody {
  model_id: string;
  seed: number | null;
  p_dropout: number;
  p_scale: number;
  placement: "all" | "first";
  variant_count: number;
}

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string; signal?: AbortSignal },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...a) => fetch(...a),
  ) {}

  async listModels(): Promise<ModelInfo[]> {
    const res = await this.fetchFn(`${this.baseUrl}/models`);
    if (!res.ok) throw new ApiError(res.status, `GET /models failed (${res.status})`);
    return z.array(modelInfoSchema).parse(await res.json());
  }

  /** POST /generate with exactly the given body; the caller owns the body so
   * the outgoing request always equals the visible control state. */
  async generate(body: GenerateRequestBody, signal?: AbortSignal): Promise<GenerateResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/generate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!res.ok) throw new ApiError(res.status, `POST /generate failed (${res.status})`);
    return generateResponseSchema.parse(await res.json());
  }
}
