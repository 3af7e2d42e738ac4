// Display formatting. All values are pure functions of the service payload:
// the UI never recomputes probabilities or confidence.

/** 850 ms renders as "0.9 s" (seconds to one decimal, halves up). */
export function formatLatency(latencyMs: number): string {
  return `${(Math.round(latencyMs / 100) / 10).toFixed(1)} s`;
}

/** 0.97 renders as "97%". */
export function formatConfidence(confidence: number): string {
  return `${Math.round(confidence * 100)}%`;
}

export function formatClassName(name: string): string {
  return name.replace(/_/g, " ");
}
