import type { ScanStatus, ScanView } from "./types.js";

// uploaded -> classifying -> classified -> segmenting -> segmented,
// with error reachable from any in-flight state.
const TRANSITIONS: Record<ScanStatus, ScanStatus[]> = {
  uploaded: ["classifying"],
  classifying: ["classified", "error"],
  classified: ["segmenting", "classifying"],
  segmenting: ["segmented", "error"],
  segmented: ["classifying", "segmenting"],
  error: ["classifying", "segmenting"],
};

export function canTransition(from: ScanStatus, to: ScanStatus): boolean {
  return TRANSITIONS[from].includes(to);
}

export function transition(view: ScanView, to: ScanStatus, patch: Partial<ScanView> = {}): ScanView {
  if (!canTransition(view.status, to)) {
    throw new Error(`illegal scan status transition ${view.status} -> ${to}`);
  }
  return { ...view, ...patch, status: to };
}

/** A scan with a request in flight cannot start a second one. */
export function isBusy(view: ScanView): boolean {
  return view.status === "classifying" || view.status === "segmenting";
}
