import type {
  HistoryPayload,
  InferenceResult,
  ServiceError,
  TumorInfoEntry,
} from "./types.js";

export class ApiError extends Error implements ServiceError {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let code = "unknown";
  let message = response.statusText;
  try {
    const body = await response.json();
    if (body?.error) {
      code = body.error.code;
      message = body.error.message;
    }
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiError(response.status, code, message);
}

/** Thin typed client over the /api/v1 endpoints. */
export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}/api/v1${path}`;
  }

  async createPatient(patientId: string, displayName?: string): Promise<{ patient_id: string }> {
    const response = await fetch(this.url("/patients"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ patient_id: patientId, display_name: displayName ?? patientId }),
    });
    await raiseForStatus(response);
    return response.json();
  }

  async uploadScan(patientId: string, payload: Blob | ArrayBuffer): Promise<{ scan_id: string }> {
    const response = await fetch(this.url(`/patients/${patientId}/scans`), {
      method: "POST",
      headers: { "content-type": "image/png" },
      body: payload,
    });
    await raiseForStatus(response);
    return response.json();
  }

  async classifyScan(scanId: string): Promise<InferenceResult> {
    const response = await fetch(this.url(`/scans/${scanId}/classify`), { method: "POST" });
    await raiseForStatus(response);
    return response.json();
  }

  async segmentScan(scanId: string): Promise<InferenceResult> {
    const response = await fetch(this.url(`/scans/${scanId}/segment`), { method: "POST" });
    await raiseForStatus(response);
    return response.json();
  }

  async getHistory(patientId: string): Promise<HistoryPayload> {
    const response = await fetch(this.url(`/patients/${patientId}/history`));
    await raiseForStatus(response);
    return response.json();
  }

  async getTumorInfo(className: string): Promise<TumorInfoEntry> {
    const response = await fetch(this.url(`/tumor-info/${className}`));
    await raiseForStatus(response);
    return response.json();
  }

  scanImageUrl(scanId: string): string {
    return this.url(`/scans/${scanId}/image`);
  }

  maskUrl(scanId: string): string {
    return this.url(`/scans/${scanId}/mask`);
  }
}
