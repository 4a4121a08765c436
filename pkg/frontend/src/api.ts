/** Thin typed client for the prediction service. The fetch implementation is
 * injectable so tests can count and fake requests. */

import type {
  HeatmapResponse,
  PredictResponse,
  SceneDoc,
  SynthStepResponse,
  Vec3,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, payload?.error ?? `HTTP ${response.status}`);
    }
    return payload as T;
  }

  predict(scene: SceneDoc, query: Vec3): Promise<PredictResponse> {
    return this.post<PredictResponse>("/v1/predict", { scene, query });
  }

  heatmap(scene: SceneDoc, surface: string, resolution: number): Promise<HeatmapResponse> {
    return this.post<HeatmapResponse>("/v1/heatmap", { scene, surface, resolution });
  }

  synthStep(scene: SceneDoc, surface: string, resolution: number): Promise<SynthStepResponse> {
    return this.post<SynthStepResponse>("/v1/synthesize/step", { scene, surface, resolution });
  }

  async health(): Promise<Record<string, unknown>> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/health`);
    return (await response.json()) as Record<string, unknown>;
  }
}
