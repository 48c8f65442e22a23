// Typed client for the /api/v1 session endpoints.

export interface GenerateResponse {
  wav_base64: string;
  z_digest: string;
}

export interface AnalyzeResponse {
  c: number[];
  note: string;
}

export interface SessionState {
  z_center: number[];
  e1: number[];
  e2: number[];
  mode: string;
  c: number[];
  last_clip_id: string | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`API error ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, body?.detail ?? "unknown error");
    }
    return body as T;
  }

  private post<T>(path: string, payload?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
  }

  async createSession(): Promise<string> {
    const body = await this.post<{ session_id: string }>("/api/v1/session");
    return body.session_id;
  }

  sampleCenter(sessionId: string, seed: number | null, mode?: string): Promise<void> {
    const payload: Record<string, unknown> = { seed };
    if (mode) payload.mode = mode;
    return this.post(`/api/v1/session/${sessionId}/sample-center`, payload);
  }

  changeDirection(sessionId: string, seed: number | null): Promise<void> {
    return this.post(`/api/v1/session/${sessionId}/change-direction`, { seed });
  }

  generate(sessionId: string, u: number, v: number | null, c: number[]): Promise<GenerateResponse> {
    const payload: Record<string, unknown> = { u, c };
    if (v !== null) payload.v = v;
    return this.post(`/api/v1/session/${sessionId}/generate`, payload);
  }

  async analyze(sessionId: string, file: Blob, filename: string): Promise<AnalyzeResponse> {
    const form = new FormData();
    form.append("file", file, filename);
    const resp = await this.fetchImpl(`${this.baseUrl}/api/v1/session/${sessionId}/analyze`, {
      method: "POST",
      body: form,
    });
    const body = await resp.json();
    if (!resp.ok) throw new ApiError(resp.status, body?.detail ?? "unknown error");
    return body as AnalyzeResponse;
  }

  state(sessionId: string): Promise<SessionState> {
    return this.request<SessionState>(`/api/v1/session/${sessionId}/state`);
  }
}
