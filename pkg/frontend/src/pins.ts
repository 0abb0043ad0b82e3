/** Pin board: client-side list of pinned variants, each carrying the full
 * provenance needed to regenerate it byte-identically (model, latent seed,
 * mask seed, probabilities, placement). Persisted via a pluggable storage so
 * the board survives page reloads; the server stays stateless. */

import { z } from "zod";
import type { GenerateRequestBody, GenerateResponse, Variant } from "./api";

export const pinSchema = z.object({
  id: z.string(),
  modelId: z.string(),
  seed: z.number().int(),
  maskSeed: z.number().int().nullable(),
  pDropout: z.number(),
  pScale: z.number(),
  placement: z.enum(["all", "first"]),
  pngBase64: z.string(),
  unavailable: z.boolean().default(false),
});
export type Pin = z.infer<typeof pinSchema>;

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "explorer-ui.pins.v1";

export function pinFromVariant(response: GenerateResponse, variant: Variant): Pin {
  return {
    id: `${response.model_id}:${response.seed}:${variant.mask_seed ?? "base"}:${response.p_dropout}:${response.p_scale}:${response.placement}`,
    modelId: response.model_id,
    seed: response.seed,
    maskSeed: variant.mask_seed,
    pDropout: response.p_dropout,
    pScale: response.p_scale,
    placement: response.placement,
    pngBase64: variant.png_base64,
    unavailable: false,
  };
}

/** Request that replays a pin exactly: same latent seed, and enough variants
 * that the pinned mask seed's slot is regenerated (variant i uses mask seed
 * i, the baseline slot 0 has none). */
export function regenerateRequest(pin: Pin): { body: GenerateRequestBody; variantIndex: number } {
  const index = pin.maskSeed ?? 0;
  return {
    body: {
      model_id: pin.modelId,
      seed: pin.seed,
      p_dropout: pin.pDropout,
      p_scale: pin.pScale,
      placement: pin.placement,
      variant_count: index + 1,
    },
    variantIndex: index,
  };
}

export class PinBoard {
  private pins: Pin[];

  constructor(private readonly storage: StorageLike) {
    this.pins = this.load();
  }

  private load(): Pin[] {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (raw === null) return [];
    try {
      return z.array(pinSchema).parse(JSON.parse(raw));
    } catch {
      return [];   // corrupt persistence is dropped, not fatal
    }
  }

  private save(): void {
    this.storage.setItem(STORAGE_KEY, JSON.stringify(this.pins));
  }

  list(): readonly Pin[] {
    return this.pins;
  }

  /** Add a pin (idempotent on id); returns false if already pinned. */
  pin(pin: Pin): boolean {
    if (this.pins.some((p) => p.id === pin.id)) return false;
    this.pins.push(pin);
    this.save();
    return true;
  }

  /** Remove exactly the pin with this id; returns whether one was removed. */
  unpin(id: string): boolean {
    const before = this.pins.length;
    this.pins = this.pins.filter((p) => p.id !== id);
    this.save();
    return this.pins.length === before - 1;
  }

  markUnavailable(id: string, unavailable = true): void {
    const pin = this.pins.find((p) => p.id === id);
    if (pin) {
      pin.unavailable = unavailable;
      this.save();
    }
  }
}
