/** Probability slider behavior: values snap to the comparison grid
 * {0, 0.2, 0.4, 0.6, 0.8} unless fine-adjust mode is on, in which case any
 * value in [0, MAX_P] is allowed. */

export const GRID_VALUES = [0, 0.2, 0.4, 0.6, 0.8] as const;

/** Probabilities must stay strictly below 1; the server rejects p >= 1. */
export const MAX_P = 0.99;

export function clampProbability(raw: number): number {
  if (!Number.isFinite(raw)) return 0;
  return Math.min(MAX_P, Math.max(0, raw));
}

export function snapProbability(raw: number, fine: boolean): number {
  const v = clampProbability(raw);
  if (fine) return Math.round(v * 100) / 100;
  let best: number = GRID_VALUES[0];
  for (const g of GRID_VALUES) {
    if (Math.abs(v - g) < Math.abs(v - best)) best = g;
  }
  return best;
}

export function formatProbability(p: number): string {
  return p.toFixed(2).replace(/0$/, "").replace(/\.$/, ".0");
}
