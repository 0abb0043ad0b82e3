/** Session state and its mapping onto /generate request bodies. The request
 * body is derived from state by one pure function so the UI can never send
 * parameters that differ from the visible controls. */

import type { GenerateRequestBody } from "./api";
import { snapProbability } from "./controls";

export interface SessionState {
  modelId: string | null;
  seed: number;
  pDropout: number;
  pScale: number;
  linkScale: boolean;          // keep p_scale matched to p_dropout
  fineAdjust: boolean;
  placement: "all" | "first";
  variantCount: number;
}

export function initialState(): SessionState {
  return {
    modelId: null,
    seed: newSeed(),
    pDropout: 0,
    pScale: 0,
    linkScale: true,
    fineAdjust: false,
    placement: "all",
    variantCount: 9,
  };
}

export function newSeed(): number {
  return Math.floor(Math.random() * 2 ** 48);
}

export function setDropout(state: SessionState, raw: number): SessionState {
  const p = snapProbability(raw, state.fineAdjust);
  return { ...state, pDropout: p, pScale: state.linkScale ? p : state.pScale };
}

export function setScale(state: SessionState, raw: number): SessionState {
  return { ...state, linkScale: false, pScale: snapProbability(raw, state.fineAdjust) };
}

export function requestBody(state: SessionState): GenerateRequestBody {
  if (state.modelId === null) throw new Error("no model selected");
  return {
    model_id: state.modelId,
    seed: state.seed,
    p_dropout: state.pDropout,
    p_scale: state.pScale,
    placement: state.placement,
    variant_count: state.variantCount,
  };
}
