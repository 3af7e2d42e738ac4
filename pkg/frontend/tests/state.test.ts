import { describe, expect, it } from "vitest";
import { canTransition, isBusy, transition } from "../src/state.js";
import type { ScanStatus, ScanView } from "../src/types.js";

function view(status: ScanStatus): ScanView {
  return { scanId: "abc123", imageUrl: "/api/v1/scans/abc123/image", status };
}

describe("scan status transitions", () => {
  it("walks the happy path upload -> classify -> segment", () => {
    let v = view("uploaded");
    v = transition(v, "classifying");
    v = transition(v, "classified");
    v = transition(v, "segmenting");
    v = transition(v, "segmented");
    expect(v.status).toBe("segmented");
  });

  it("reaches error only from in-flight states", () => {
    expect(canTransition("classifying", "error")).toBe(true);
    expect(canTransition("segmenting", "error")).toBe(true);
    expect(canTransition("uploaded", "error")).toBe(false);
    expect(canTransition("classified", "error")).toBe(false);
    expect(canTransition("segmented", "error")).toBe(false);
  });

  it("allows retrying after an error", () => {
    expect(canTransition("error", "classifying")).toBe(true);
    expect(canTransition("error", "segmenting")).toBe(true);
  });

  it("rejects skipping the in-flight states", () => {
    expect(canTransition("uploaded", "classified")).toBe(false);
    expect(canTransition("classified", "segmented")).toBe(false);
    expect(() => transition(view("uploaded"), "segmented")).toThrow(/illegal/);
  });

  it("applies the patch on a legal transition", () => {
    const v = transition(view("classifying"), "classified", {
      result: { confidence: 0.5 },
    });
    expect(v.status).toBe("classified");
    expect(v.result?.confidence).toBe(0.5);
  });
});

describe("isBusy", () => {
  it("is true only while a request is in flight", () => {
    expect(isBusy(view("classifying"))).toBe(true);
    expect(isBusy(view("segmenting"))).toBe(true);
    expect(isBusy(view("uploaded"))).toBe(false);
    expect(isBusy(view("classified"))).toBe(false);
    expect(isBusy(view("segmented"))).toBe(false);
    expect(isBusy(view("error"))).toBe(false);
  });
});
