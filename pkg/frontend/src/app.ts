// Browser entry point: wires the pure renderers to the DOM and the API client.

import { ApiClient, ApiError } from "./api.js";
import { renderHistory, renderScanCard, renderTumorInfo } from "./render.js";
import { isBusy, transition } from "./state.js";
import type { ScanView, ServiceError, TumorClassName } from "./types.js";

function toServiceError(err: unknown): ServiceError {
  if (err instanceof ApiError) {
    return { status: err.status, code: err.code, message: err.message };
  }
  return { status: 0, code: "network", message: String(err) };
}

export class App {
  private view: ScanView | null = null;
  private overlayVisible = true;
  private opacityPct = 50;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
    private statusBar: HTMLElement,
    public patientId: string,
  ) {}

  private paint(): void {
    if (this.view) {
      this.root.innerHTML = renderScanCard(this.view, this.opacityPct, this.overlayVisible);
      this.bindOverlayControls();
    }
  }

  private bindOverlayControls(): void {
    const toggle = this.root.querySelector<HTMLInputElement>(".overlay-toggle");
    toggle?.addEventListener("change", () => {
      this.overlayVisible = toggle.checked;
      this.paint();
    });
    const slider = this.root.querySelector<HTMLInputElement>(".overlay-opacity");
    slider?.addEventListener("input", () => {
      this.opacityPct = Number(slider.value);
      this.paint();
    });
  }

  async upload(payload: Blob | ArrayBuffer): Promise<void> {
    try {
      const { scan_id } = await this.api.uploadScan(this.patientId, payload);
      this.view = {
        scanId: scan_id,
        imageUrl: this.api.scanImageUrl(scan_id),
        status: "uploaded",
      };
      this.paint();
      await this.classify();
    } catch (err) {
      // an upload failure has no scan card to attach to; show it in the status bar
      const e = toServiceError(err);
      this.statusBar.textContent = `Upload failed: ${e.message}`;
    }
  }

  async classify(): Promise<void> {
    if (!this.view || isBusy(this.view)) return;
    this.view = transition(this.view, "classifying");
    this.paint();
    try {
      const result = await this.api.classifyScan(this.view.scanId);
      this.view = transition(this.view, "classified", { result, error: undefined });
    } catch (err) {
      this.view = transition(this.view, "error", { error: toServiceError(err) });
    }
    this.paint();
  }

  async segment(): Promise<void> {
    if (!this.view || isBusy(this.view)) return;
    this.view = transition(this.view, "segmenting");
    this.paint();
    try {
      const result = await this.api.segmentScan(this.view.scanId);
      this.view = transition(this.view, "segmented", {
        result,
        maskUrl: this.api.maskUrl(this.view.scanId),
        error: undefined,
      });
    } catch (err) {
      this.view = transition(this.view, "error", { error: toServiceError(err) });
    }
    this.paint();
  }

  async showHistory(container: HTMLElement): Promise<void> {
    const history = await this.api.getHistory(this.patientId);
    container.innerHTML = renderHistory(history, (scanId) => this.api.scanImageUrl(scanId));
  }

  async showTumorInfo(container: HTMLElement, className: TumorClassName): Promise<void> {
    const entry = await this.api.getTumorInfo(className);
    container.innerHTML = renderTumorInfo(entry);
  }
}

export function mount(doc: Document): App {
  const api = new ApiClient("");
  const app = new App(
    api,
    doc.getElementById("scan")!,
    doc.getElementById("status-bar")!,
    "demo-patient",
  );
  const fileInput = doc.getElementById("scan-file") as HTMLInputElement;
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (file) void app.upload(file);
  });
  doc.getElementById("segment-btn")?.addEventListener("click", () => void app.segment());
  doc.getElementById("history-btn")?.addEventListener("click", () => {
    void app.showHistory(doc.getElementById("history")!);
  });
  return app;
}
