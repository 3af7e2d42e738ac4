// Pure renderers: HTML strings computed only from the last service payload,
// so every visible number is snapshot-testable against the wire data.

import { formatClassName, formatConfidence, formatLatency } from "./format.js";
import type {
  HistoryPayload,
  InferenceResult,
  ScanView,
  ServiceError,
  TumorInfoEntry,
} from "./types.js";
import { TUMOR_CLASSES } from "./types.js";

export const OVERLAY_TINT = "rgba(220, 38, 38, 1)"; // fixed red

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderProbabilityBars(probabilities: Record<string, number>): string {
  const bars = TUMOR_CLASSES.map((name) => {
    const value = probabilities[name] ?? 0;
    return (
      `<div class="prob-row">` +
      `<span class="prob-label">${formatClassName(name)}</span>` +
      `<div class="prob-track"><div class="prob-bar" data-class="${name}" ` +
      `data-value="${value}" style="width: ${value * 100}%"></div></div>` +
      `<span class="prob-value">${formatConfidence(value)}</span>` +
      `</div>`
    );
  });
  return `<div class="prob-chart">${bars.join("")}</div>`;
}

export function renderResult(result: Partial<InferenceResult>): string {
  const parts: string[] = [];
  if (result.predicted_class !== undefined && result.confidence !== undefined) {
    parts.push(
      `<div class="verdict">` +
      `<span class="predicted-class">${formatClassName(result.predicted_class)}</span>` +
      `<span class="confidence">${formatConfidence(result.confidence)}</span>` +
      `</div>`,
    );
  }
  if (result.latency_ms !== undefined) {
    parts.push(`<span class="latency-badge">${formatLatency(result.latency_ms)}</span>`);
  }
  if (result.probabilities) {
    parts.push(renderProbabilityBars(result.probabilities));
  }
  return `<div class="result">${parts.join("")}</div>`;
}

/** Distinct rendering per service error code; no silent failures. */
export function renderError(error: ServiceError): string {
  const retriable = error.status === 503;
  const kind =
    error.status === 404 ? "not-found" : error.status === 422 ? "rejected" : error.status === 503 ? "unavailable" : "failed";
  const label =
    kind === "not-found" ? "Not found" :
    kind === "rejected" ? "Upload rejected" :
    kind === "unavailable" ? "Model unavailable" : "Request failed";
  return (
    `<div class="error error-${kind}" data-status="${error.status}" data-code="${escapeHtml(error.code)}">` +
    `<strong>${label}</strong>` +
    `<p>${escapeHtml(error.message)}</p>` +
    (retriable ? `<button class="retry">Retry</button>` : "") +
    `</div>`
  );
}

export function renderMaskOverlay(maskUrl: string, visible: boolean, opacityPct: number): string {
  const opacity = Math.min(100, Math.max(0, opacityPct)) / 100;
  const mask = visible
    ? `<img class="mask-overlay" src="${maskUrl}" ` +
      `style="opacity: ${opacity}; --overlay-tint: ${OVERLAY_TINT}" alt="tumor mask">`
    : "";
  return (
    `<div class="overlay-controls">` +
    `<label><input type="checkbox" class="overlay-toggle"${visible ? " checked" : ""}> Overlay</label>` +
    `<input type="range" class="overlay-opacity" min="0" max="100" value="${opacityPct}">` +
    `</div>${mask}`
  );
}

export function renderScanCard(view: ScanView, opacityPct = 50, overlayVisible = true): string {
  const body: string[] = [`<img class="scan-image" src="${view.imageUrl}" alt="MRI scan">`];
  if (view.status === "error" && view.error) {
    body.push(renderError(view.error));
  } else {
    if (view.status === "classifying" || view.status === "segmenting") {
      body.push(`<div class="spinner">${view.status}&hellip;</div>`);
    }
    if (view.result) {
      body.push(renderResult(view.result));
    }
    if (view.maskUrl && (view.status === "segmented" || view.result?.mask_ref)) {
      body.push(renderMaskOverlay(view.maskUrl, overlayVisible, opacityPct));
    }
  }
  return (
    `<article class="scan-card" data-scan-id="${view.scanId}" data-status="${view.status}">` +
    body.join("") +
    `</article>`
  );
}

export function renderHistory(history: HistoryPayload, imageUrlFor: (scanId: string) => string): string {
  if (history.scans.length === 0) {
    return (
      `<div class="history-empty">` +
      `<p>No scans yet for this patient.</p>` +
      `<button class="upload-cta">Upload an MRI scan</button>` +
      `</div>`
    );
  }
  const cards = history.scans.map((entry) => {
    const summary = entry.result?.predicted_class !== undefined && entry.result?.confidence !== undefined
      ? `<span class="predicted-class">${formatClassName(entry.result.predicted_class)}</span>` +
        `<span class="confidence">${formatConfidence(entry.result.confidence)}</span>`
      : `<span class="pending">not yet classified</span>`;
    return (
      `<li class="history-card" data-scan-id="${entry.scan_id}">` +
      `<img class="thumb" src="${imageUrlFor(entry.scan_id)}" alt="scan thumbnail">` +
      `<div class="summary">${summary}</div>` +
      `<time>${entry.uploaded_at}</time>` +
      `</li>`
    );
  });
  return `<ol class="history-list" data-patient-id="${history.patient_id}">${cards.join("")}</ol>`;
}

export function renderTumorInfo(entry: TumorInfoEntry): string {
  const sections = (["overview", "causes", "symptoms", "treatments"] as const)
    .map(
      (key) =>
        `<section class="info-${key}"><h2>${key[0].toUpperCase()}${key.slice(1)}</h2>` +
        `<p>${escapeHtml(entry[key])}</p></section>`,
    )
    .join("");
  return (
    `<article class="tumor-info" data-class="${entry.class}">` +
    `<h1>${formatClassName(entry.class)}</h1>${sections}</article>`
  );
}
