/** Thin typed client over the REST API.  All calls go through a single
 * fetch wrapper; per-view in-flight deduplication keeps a burst of
 * identical requests down to one network round trip. */

import type {
  Assessment,
  EventRecord,
  ModelInfo,
  Narrative,
  PatientDetail,
  PatientSummary,
  PopulationSummary,
} from './types.js';

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly url: string,
  ) {
    super(`request to ${url} failed with status ${status}`);
    this.name = 'ApiError';
  }
}

export class ApiClient {
  private inFlight = new Map<string, Promise<unknown>>();

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const url = this.baseUrl + path;
    const pending = this.inFlight.get(url);
    if (pending) return pending as Promise<T>;
    const request = (async () => {
      try {
        const res = await this.fetchImpl(url);
        if (!res.ok) throw new ApiError(res.status, url);
        return (await res.json()) as T;
      } finally {
        this.inFlight.delete(url);
      }
    })();
    this.inFlight.set(url, request);
    return request;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const url = this.baseUrl + path;
    const res = await this.fetchImpl(url, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new ApiError(res.status, url);
    return (await res.json()) as T;
  }

  modelInfo(): Promise<ModelInfo> {
    return this.getJson('/api/model/info');
  }

  patients(): Promise<PatientSummary[]> {
    return this.getJson('/api/patients');
  }

  patient(id: string): Promise<PatientDetail> {
    return this.getJson(`/api/patients/${encodeURIComponent(id)}`);
  }

  assessment(id: string, topK = 10): Promise<Assessment> {
    return this.getJson(
      `/api/patients/${encodeURIComponent(id)}/assessment?top_k=${topK}`,
    );
  }

  population(feature: string, n = 200, seed = 0): Promise<PopulationSummary> {
    return this.getJson(
      `/api/population/${encodeURIComponent(feature)}?n=${n}&seed=${seed}`,
    );
  }

  advice(id: string, visit: number, topK = 10): Promise<Narrative> {
    return this.postJson(
      `/api/patients/${encodeURIComponent(id)}/advice?visit=${visit}&top_k=${topK}`,
      {},
    );
  }

  postEvent(event: EventRecord): Promise<unknown> {
    return this.postJson('/api/events', event);
  }
}
