/**
 * Typed client for the consultation service JSON API.
 *
 * The fetch implementation is injectable so contract tests can run against
 * a scripted mock of the wire format.
 */

export type Attr = "POS" | "NEG" | "UNK";

export interface DiagnosisPayload {
  disease: string;
  probs: Record<string, number>;
  stop_reason: string;
  turn: number;
}

export interface TurnResponse {
  query: string | null;
  diagnosis: DiagnosisPayload | null;
  turn: number;
  confidence: number;
}

export interface StartResponse extends TurnResponse {
  session_id: string;
}

export interface VocabResponse {
  symptoms: string[];
  diseases: string[];
}

export interface SnapshotResponse {
  session_id: string;
  context: [string, Attr][];
  turn: number;
  pending_query: string | null;
  stopped: string | null;
  confidence_trace: number[];
  diagnosis: DiagnosisPayload | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail =
        typeof body === "object" && body !== null && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  getVocab(): Promise<VocabResponse> {
    return this.request<VocabResponse>("/api/vocab");
  }

  startSession(explicit: [string, "POS" | "NEG"][]): Promise<StartResponse> {
    return this.request<StartResponse>("/api/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ explicit }),
    });
  }

  answer(sessionId: string, attribute: Attr, turn: number): Promise<TurnResponse> {
    return this.request<TurnResponse>(`/api/sessions/${sessionId}/answer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      // the turn sequence number lets the server reject double submits
      body: JSON.stringify({ attribute, turn }),
    });
  }

  getSnapshot(sessionId: string): Promise<SnapshotResponse> {
    return this.request<SnapshotResponse>(`/api/sessions/${sessionId}`);
  }
}
