import { describe, expect, it } from "vitest";

import { clampProbability, formatProbability, GRID_VALUES, MAX_P, snapProbability } from "../src/controls";

describe("snapProbability", () => {
  it("snaps to the comparison grid when fine-adjust is off", () => {
    expect(snapProbability(0.05, false)).toBe(0);
    expect(snapProbability(0.11, false)).toBe(0.2);
    expect(snapProbability(0.33, false)).toBe(0.4);
    expect(snapProbability(0.55, false)).toBe(0.6);
    expect(snapProbability(0.95, false)).toBe(0.8);
  });

  it("returns grid values unchanged", () => {
    for (const g of GRID_VALUES) expect(snapProbability(g, false)).toBe(g);
  });

  it("passes arbitrary values through in fine-adjust mode", () => {
    expect(snapProbability(0.37, true)).toBe(0.37);
    expect(snapProbability(0.123, true)).toBe(0.12);
  });

  it("never reaches 1 in either mode", () => {
    expect(snapProbability(1.0, true)).toBe(MAX_P);
    expect(snapProbability(5, false)).toBe(0.8);
  });
});

describe("clampProbability", () => {
  it("clamps into [0, MAX_P] and maps non-finite input to 0", () => {
    expect(clampProbability(-0.3)).toBe(0);
    expect(clampProbability(2)).toBe(MAX_P);
    expect(clampProbability(Number.NaN)).toBe(0);
    expect(clampProbability(0.5)).toBe(0.5);
  });
});

describe("formatProbability", () => {
  it("renders grid and fine values compactly", () => {
    expect(formatProbability(0)).toBe("0.0");
    expect(formatProbability(0.2)).toBe("0.2");
    expect(formatProbability(0.37)).toBe("0.37");
  });
});
