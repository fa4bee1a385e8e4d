/**
 * Thin fetch wrapper around the makeuplab session service.
 *
 * Every method maps to one endpoint and returns parsed JSON or raw bytes.
 * The editor talks to the service exclusively through this interface, which
 * also makes it easy to substitute an in-memory fake in unit tests.
 */

import type {
  ApplyResponse,
  ExtractResponse,
  HealthInfo,
  RegionLayersResponse,
  SaveMaskResponse,
  SessionState,
  SourceImage,
} from "./types.js";

export class ApiError extends Error {
  public status: number;

  constructor(status: number, detail: string) {
    super(`service returned ${status}: ${detail}`);
    this.status = status;
  }
}

export interface CreateSessionFiles {
  target: Uint8Array;
  reference: Uint8Array;
  targetLandmarks?: string;
  referenceLandmarks?: string;
}

/** The surface the editor needs; StudioClient is the real implementation. */
export interface StudioApi {
  createSession(files: CreateSessionFiles): Promise<SessionState>;
  getSession(sessionId: string): Promise<SessionState>;
  extract(sessionId: string, method?: string, params?: Record<string, unknown>): Promise<ExtractResponse>;
  getMask(sessionId: string, version?: number): Promise<Uint8Array>;
  putMask(sessionId: string, png: Uint8Array): Promise<SaveMaskResponse>;
  apply(sessionId: string, bypass?: boolean): Promise<ApplyResponse>;
  getResult(sessionId: string, version?: number): Promise<Uint8Array>;
  getRegions(sessionId: string): Promise<RegionLayersResponse>;
  getImage(sessionId: string, which: SourceImage): Promise<Uint8Array>;
}

function base64ToBytes(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

export class StudioClient implements StudioApi {
  private baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async readJson<T>(res: Response): Promise<T> {
    if (!res.ok) {
      throw new ApiError(res.status, await res.text());
    }
    return (await res.json()) as T;
  }

  private async readBytes(res: Response): Promise<Uint8Array> {
    if (!res.ok) {
      throw new ApiError(res.status, await res.text());
    }
    return new Uint8Array(await res.arrayBuffer());
  }

  public async health(): Promise<HealthInfo> {
    return this.readJson(await fetch(`${this.baseUrl}/health`));
  }

  public async createSession(files: CreateSessionFiles): Promise<SessionState> {
    const form = new FormData();
    form.append("target", new Blob([files.target.slice().buffer], { type: "image/png" }), "target.png");
    form.append(
      "reference",
      new Blob([files.reference.slice().buffer], { type: "image/png" }),
      "reference.png"
    );
    if (files.targetLandmarks !== undefined) {
      form.append(
        "target_landmarks",
        new Blob([files.targetLandmarks], { type: "application/json" }),
        "target.json"
      );
    }
    if (files.referenceLandmarks !== undefined) {
      form.append(
        "reference_landmarks",
        new Blob([files.referenceLandmarks], { type: "application/json" }),
        "reference.json"
      );
    }
    const res = await fetch(`${this.baseUrl}/sessions`, { method: "POST", body: form });
    return this.readJson(res);
  }

  public async getSession(sessionId: string): Promise<SessionState> {
    return this.readJson(await fetch(`${this.baseUrl}/sessions/${sessionId}`));
  }

  public async extract(
    sessionId: string,
    method?: string,
    params?: Record<string, unknown>
  ): Promise<ExtractResponse> {
    const body: Record<string, unknown> = {};
    if (method !== undefined) body.method = method;
    if (params !== undefined) body.params = params;
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/extract`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return this.readJson(res);
  }

  public async getMask(sessionId: string, version?: number): Promise<Uint8Array> {
    const query = version === undefined ? "" : `?version=${version}`;
    return this.readBytes(await fetch(`${this.baseUrl}/sessions/${sessionId}/mask${query}`));
  }

  public async putMask(sessionId: string, png: Uint8Array): Promise<SaveMaskResponse> {
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/mask`, {
      method: "PUT",
      headers: { "content-type": "image/png" },
      body: png.slice().buffer,
    });
    return this.readJson(res);
  }

  public async apply(sessionId: string, bypass?: boolean): Promise<ApplyResponse> {
    const body: Record<string, unknown> = {};
    if (bypass !== undefined) body.bypass = bypass;
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/apply`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return this.readJson(res);
  }

  public async getResult(sessionId: string, version?: number): Promise<Uint8Array> {
    const query = version === undefined ? "" : `?version=${version}`;
    return this.readBytes(await fetch(`${this.baseUrl}/sessions/${sessionId}/result${query}`));
  }

  public async getRegions(sessionId: string): Promise<RegionLayersResponse> {
    return this.readJson(await fetch(`${this.baseUrl}/sessions/${sessionId}/regions`));
  }

  public async getImage(sessionId: string, which: SourceImage): Promise<Uint8Array> {
    return this.readBytes(await fetch(`${this.baseUrl}/sessions/${sessionId}/image/${which}`));
  }
}

/** Decode the base64 PNG layers from GET /sessions/{id}/regions. */
export function regionLayerBytes(layers: Record<string, string>): Record<string, Uint8Array> {
  const out: Record<string, Uint8Array> = {};
  for (const [name, b64] of Object.entries(layers)) {
    out[name] = base64ToBytes(b64);
  }
  return out;
}
