/** DOM entry point: wires the controls, variant grid, and pin board to the
 * generation API. All logic that matters is in the imported modules; this
 * file only reflects state into the DOM and DOM events back into state. */

import { ApiClient, type GenerateResponse, type ModelInfo, type Variant } from "./api";
import { formatProbability, MAX_P } from "./controls";
import { PinBoard, pinFromVariant, regenerateRequest, type Pin } from "./pins";
import { GenerateScheduler } from "./scheduler";
import { initialState, newSeed, requestBody, setDropout, setScale, type SessionState } from "./state";

const API_BASE = (window as { EXPLORER_API_BASE?: string }).EXPLORER_API_BASE
  ?? "http://127.0.0.1:8000";

const api = new ApiClient(API_BASE);
const scheduler = new GenerateScheduler((body, signal) => api.generate(body, signal));
const pinBoard = new PinBoard(window.localStorage);

let state: SessionState = initialState();
let lastResponse: GenerateResponse | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function showBanner(message: string | null): void {
  const banner = $("banner");
  banner.textContent = message ?? "";
  banner.hidden = message === null;
}

function renderControls(): void {
  ($("p-dropout") as HTMLInputElement).value = String(state.pDropout);
  ($("p-scale") as HTMLInputElement).value = String(state.pScale);
  $("p-dropout-value").textContent = formatProbability(state.pDropout);
  $("p-scale-value").textContent = formatProbability(state.pScale);
  ($("seed") as HTMLInputElement).value = String(state.seed);
  ($("link-scale") as HTMLInputElement).checked = state.linkScale;
  ($("fine-adjust") as HTMLInputElement).checked = state.fineAdjust;
  ($("placement") as HTMLInputElement).checked = state.placement === "first";
  ($("variant-count") as HTMLInputElement).value = String(state.variantCount);
}

function variantCard(response: GenerateResponse, variant: Variant): HTMLElement {
  const card = document.createElement("figure");
  card.className = "variant";
  const img = document.createElement("img");
  img.src = `data:image/png;base64,${variant.png_base64}`;
  img.alt = variant.mask_seed === null ? "baseline" : `variant ${variant.index}`;
  card.appendChild(img);
  const caption = document.createElement("figcaption");
  if (variant.mask_seed === null) {
    const badge = document.createElement("span");
    badge.className = "badge";
    badge.textContent = "baseline";
    caption.appendChild(badge);
  } else {
    caption.textContent = `mask ${variant.mask_seed}`;
  }
  const pinBtn = document.createElement("button");
  pinBtn.textContent = "pin";
  pinBtn.onclick = () => {
    pinBoard.pin(pinFromVariant(response, variant));
    renderPins();
  };
  caption.appendChild(pinBtn);
  card.appendChild(caption);
  return card;
}

function renderGrid(response: GenerateResponse): void {
  lastResponse = response;
  const grid = $("grid");
  grid.replaceChildren(...response.variants.map((v) => variantCard(response, v)));
  $("grid-meta").textContent =
    `model ${response.model_id}, seed ${response.seed}, ` +
    `p_dropout ${formatProbability(response.p_dropout)}, ` +
    `p_scale ${formatProbability(response.p_scale)}, placement ${response.placement}`;
}

function renderPins(): void {
  const board = $("pins");
  board.replaceChildren(...pinBoard.list().map((pin) => pinCard(pin)));
}

function pinCard(pin: Pin): HTMLElement {
  const card = document.createElement("figure");
  card.className = "variant" + (pin.unavailable ? " unavailable" : "");
  const img = document.createElement("img");
  img.src = `data:image/png;base64,${pin.pngBase64}`;
  img.alt = `pinned ${pin.id}`;
  card.appendChild(img);
  const caption = document.createElement("figcaption");
  caption.textContent = pin.unavailable
    ? "model unavailable"
    : `p ${formatProbability(pin.pDropout)}/${formatProbability(pin.pScale)}`;
  const regen = document.createElement("button");
  regen.textContent = "regenerate";
  regen.onclick = () => void regeneratePin(pin);
  const unpinBtn = document.createElement("button");
  unpinBtn.textContent = "unpin";
  unpinBtn.onclick = () => {
    pinBoard.unpin(pin.id);
    renderPins();
  };
  caption.append(regen, unpinBtn);
  card.appendChild(caption);
  return card;
}

async function regeneratePin(pin: Pin): Promise<void> {
  const { body, variantIndex } = regenerateRequest(pin);
  try {
    const response = await api.generate(body);
    const variant = response.variants[variantIndex];
    if (!variant) throw new Error("variant slot missing from response");
    pinBoard.markUnavailable(pin.id, false);
    renderGrid({ ...response, variants: [variant] });
    showBanner(variant.png_base64 === pin.pngBase64
      ? null : "regenerated image differs from the pinned one");
  } catch (err) {
    const status = (err as { status?: number }).status;
    if (status === 404) {
      pinBoard.markUnavailable(pin.id);
      renderPins();
    } else {
      showBanner(`regenerate failed: ${err instanceof Error ? err.message : err}`);
    }
  }
}

async function refresh(): Promise<void> {
  if (state.modelId === null) return;
  const outcome = await scheduler.submit(requestBody(state));
  if (outcome.kind === "result") {
    showBanner(null);
    renderGrid(outcome.response);
  } else if (outcome.kind === "error") {
    // keep the last grid; just surface the failure
    showBanner(`generation failed: ${outcome.message}`);
  }
}

async function loadModels(): Promise<void> {
  let models: ModelInfo[];
  try {
    models = await api.listModels();
  } catch (err) {
    showBanner(`cannot reach API at ${API_BASE}: ${err instanceof Error ? err.message : err}`);
    return;
  }
  const select = $("model") as HTMLSelectElement;
  select.replaceChildren(...models.map((m) => {
    const opt = document.createElement("option");
    opt.value = m.model_id;
    opt.textContent = `${m.model_id} (trained p=${m.p_train})`;
    return opt;
  }));
  if (models.length > 0) {
    state = { ...state, modelId: models[0]!.model_id };
    await refresh();
  }
}

function wire(): void {
  ($("model") as HTMLSelectElement).onchange = (e) => {
    state = { ...state, modelId: (e.target as HTMLSelectElement).value };
    void refresh();
  };
  ($("seed") as HTMLInputElement).onchange = (e) => {
    state = { ...state, seed: Number((e.target as HTMLInputElement).value) || 0 };
    void refresh();
  };
  $("reseed").onclick = () => {
    state = { ...state, seed: newSeed() };
    renderControls();
    void refresh();
  };
  const slider = (id: string, apply: (s: SessionState, v: number) => SessionState) => {
    ($(id) as HTMLInputElement).oninput = (e) => {
      state = apply(state, Number((e.target as HTMLInputElement).value));
      renderControls();
      void refresh();
    };
  };
  slider("p-dropout", setDropout);
  slider("p-scale", setScale);
  ($("link-scale") as HTMLInputElement).onchange = (e) => {
    const linked = (e.target as HTMLInputElement).checked;
    state = { ...state, linkScale: linked, pScale: linked ? state.pDropout : state.pScale };
    renderControls();
    void refresh();
  };
  ($("fine-adjust") as HTMLInputElement).onchange = (e) => {
    state = { ...state, fineAdjust: (e.target as HTMLInputElement).checked };
    const step = state.fineAdjust ? "0.01" : "0.2";
    ($("p-dropout") as HTMLInputElement).step = step;
    ($("p-scale") as HTMLInputElement).step = step;
  };
  ($("placement") as HTMLInputElement).onchange = (e) => {
    state = { ...state, placement: (e.target as HTMLInputElement).checked ? "first" : "all" };
    void refresh();
  };
  ($("variant-count") as HTMLInputElement).onchange = (e) => {
    const n = Math.min(64, Math.max(1, Number((e.target as HTMLInputElement).value) || 9));
    state = { ...state, variantCount: n };
    renderControls();
    void refresh();
  };
  ($("p-dropout") as HTMLInputElement).max = String(MAX_P);
  ($("p-scale") as HTMLInputElement).max = String(MAX_P);
}

window.addEventListener("load", () => {
  wire();
  renderControls();
  renderPins();
  void loadModels();
});
