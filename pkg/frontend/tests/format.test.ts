import { describe, expect, it } from "vitest";
import { formatClassName, formatConfidence, formatLatency } from "../src/format.js";

describe("formatLatency", () => {
  it("renders 850 ms as 0.9 s", () => {
    expect(formatLatency(850)).toBe("0.9 s");
  });

  it("keeps one decimal place", () => {
    expect(formatLatency(2)).toBe("0.0 s");
    expect(formatLatency(1000)).toBe("1.0 s");
    expect(formatLatency(1949)).toBe("1.9 s");
  });
});

describe("formatConfidence", () => {
  it("renders probabilities as whole percent", () => {
    expect(formatConfidence(0.97)).toBe("97%");
    expect(formatConfidence(0.255)).toBe("26%");
    expect(formatConfidence(0)).toBe("0%");
    expect(formatConfidence(1)).toBe("100%");
  });
});

describe("formatClassName", () => {
  it("replaces underscores with spaces", () => {
    expect(formatClassName("no_tumor")).toBe("no tumor");
    expect(formatClassName("glioma")).toBe("glioma");
  });
});
