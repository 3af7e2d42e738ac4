// Payload shapes of the /api/v1 inference service.

export type TumorClassName = "glioma" | "meningioma" | "pituitary" | "no_tumor";

export const TUMOR_CLASSES: TumorClassName[] = [
  "glioma",
  "meningioma",
  "pituitary",
  "no_tumor",
];

export interface InferenceResult {
  predicted_class: TumorClassName;
  confidence: number;
  probabilities: Record<TumorClassName, number>;
  latency_ms: number;
  model_digest: string;
  mask_ref?: string;
}

export interface HistoryEntry {
  scan_id: string;
  uploaded_at: string;
  result: Partial<InferenceResult> | null;
  has_mask: boolean;
}

export interface HistoryPayload {
  patient_id: string;
  scans: HistoryEntry[];
}

export interface TumorInfoEntry {
  class: TumorClassName;
  overview: string;
  causes: string;
  symptoms: string;
  treatments: string;
}

export interface ServiceError {
  status: number;
  code: string;
  message: string;
}

export type ScanStatus =
  | "uploaded"
  | "classifying"
  | "classified"
  | "segmenting"
  | "segmented"
  | "error";

export interface ScanView {
  scanId: string;
  imageUrl: string;
  status: ScanStatus;
  result?: Partial<InferenceResult>;
  maskUrl?: string;
  error?: ServiceError;
}
