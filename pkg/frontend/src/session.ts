/**
 * Client-side consultation state.
 *
 * Every field mirrors the most recent server response; nothing is invented
 * locally. A single in-flight guard serializes answers per session, so a
 * double-clicked button never sends a second request, and a 409 from the
 * server (e.g. a replayed answer from another tab) resolves by reloading
 * the authoritative snapshot.
 */

import {
  ApiError,
  Attr,
  DiagnosisPayload,
  ServiceClient,
  StartResponse,
  TurnResponse,
} from "./api.js";

export interface TranscriptEntry {
  query: string;
  answer: Attr;
}

export class ConsoleSession {
  readonly sessionId: string;
  transcript: TranscriptEntry[] = [];
  confidenceTrace: number[] = [];
  pendingQuery: string | null;
  diagnosis: DiagnosisPayload | null;
  turn: number;
  private inFlight = false;

  constructor(
    private readonly api: ServiceClient,
    start: StartResponse,
  ) {
    this.sessionId = start.session_id;
    this.pendingQuery = start.query;
    this.diagnosis = start.diagnosis;
    this.turn = start.turn;
    this.confidenceTrace.push(start.confidence);
  }

  static async start(
    api: ServiceClient,
    explicit: [string, "POS" | "NEG"][],
  ): Promise<ConsoleSession> {
    return new ConsoleSession(api, await api.startSession(explicit));
  }

  get done(): boolean {
    return this.diagnosis !== null;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  get canAnswer(): boolean {
    return !this.done && !this.inFlight && this.pendingQuery !== null;
  }

  /**
   * Send one answer to the pending query. Returns false without any network
   * traffic when no answer may be sent (double submit, finished session).
   */
  async answer(attribute: Attr): Promise<boolean> {
    if (!this.canAnswer || this.pendingQuery === null) {
      return false;
    }
    const asked = this.pendingQuery;
    this.inFlight = true;
    try {
      const response = await this.api.answer(this.sessionId, attribute, this.turn);
      this.transcript.push({ query: asked, answer: attribute });
      this.applyTurn(response);
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.refresh();
        return false;
      }
      throw err;
    } finally {
      this.inFlight = false;
    }
  }

  /** Re-sync from the server snapshot (conflict recovery). */
  async refresh(): Promise<void> {
    const snap = await this.api.getSnapshot(this.sessionId);
    const explicitLength = snap.context.length - snap.turn;
    this.transcript = snap.context
      .slice(explicitLength)
      .map(([query, answer]) => ({ query, answer }));
    this.confidenceTrace = [...snap.confidence_trace];
    this.pendingQuery = snap.pending_query;
    this.diagnosis = snap.diagnosis;
    this.turn = snap.turn;
  }

  private applyTurn(response: TurnResponse): void {
    this.turn = response.turn;
    this.confidenceTrace.push(response.confidence);
    this.pendingQuery = response.query;
    this.diagnosis = response.diagnosis;
  }
}
