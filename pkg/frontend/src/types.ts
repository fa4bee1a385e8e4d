/** Shapes returned by the makeuplab HTTP service. */

export interface MaskVersion {
  version: number;
  file: string;
  origin: string;
}

export interface ResultVersion {
  version: number;
  file: string;
}

export interface SessionState {
  id: string;
  status: string;
  width: number;
  height: number;
  reference_width: number;
  reference_height: number;
  masks: MaskVersion[];
  results: ResultVersion[];
  has_landmarks: { target: boolean; reference: boolean };
}

export interface HealthInfo {
  status: string;
  extractor: boolean;
  generator: boolean;
  default_method: string;
}

export interface ExtractResponse {
  mask_version: number;
  status: string;
  method: string;
}

export interface SaveMaskResponse {
  mask_version: number;
  status: string;
}

export interface ApplyResponse {
  result_version: number;
  status: string;
  bypass: boolean;
}

export interface RegionLayersResponse {
  width: number;
  height: number;
  layers: Record<string, string>; // region name -> base64 PNG
}

export type SourceImage = "target" | "reference" | "warped";
