/** At most one in-flight /generate request, with cancel-on-supersede:
 * submitting a new request aborts the previous one, and a response that
 * arrives after being superseded is discarded rather than rendered. */

import type { GenerateRequestBody, GenerateResponse } from "./api";

export type GenerateOutcome =
  | { kind: "result"; response: GenerateResponse }
  | { kind: "superseded" }
  | { kind: "error"; message: string };

type Runner = (body: GenerateRequestBody, signal: AbortSignal) => Promise<GenerateResponse>;

export class GenerateScheduler {
  private controller: AbortController | null = null;
  private ticket = 0;

  constructor(private readonly run: Runner) {}

  async submit(body: GenerateRequestBody): Promise<GenerateOutcome> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.ticket;
    try {
      const response = await this.run(body, controller.signal);
      if (ticket !== this.ticket) return { kind: "superseded" };
      return { kind: "result", response };
    } catch (err) {
      if (ticket !== this.ticket || controller.signal.aborted) {
        return { kind: "superseded" };
      }
      return { kind: "error", message: err instanceof Error ? err.message : String(err) };
    } finally {
      if (ticket === this.ticket) this.controller = null;
    }
  }

  get inFlight(): boolean {
    return this.controller !== null && !this.controller.signal.aborted;
  }
}
