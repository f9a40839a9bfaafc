/**
 * Pure view-model derivation: the DOM layer renders exactly this structure,
 * and the contract tests assert on it, so everything shown on screen is a
 * function of the latest server-backed session state.
 */

import { ConsoleSession } from "./session.js";

export interface ProbabilityBar {
  disease: string;
  percent: number;
}

export interface DiagnosisCardView {
  disease: string;
  bars: ProbabilityBar[];
  stopReason: string;
  turns: number;
}

export interface ConsoleView {
  transcript: { query: string; answer: string }[];
  confidenceTrace: number[];
  queryText: string | null;
  answersEnabled: boolean;
  diagnosisCard: DiagnosisCardView | null;
}

export const ANSWER_LABELS: Record<string, string> = {
  POS: "yes, I have it",
  NEG: "no, I don't",
  UNK: "don't know",
};

export function deriveView(session: ConsoleSession): ConsoleView {
  const diagnosis = session.diagnosis;
  return {
    transcript: session.transcript.map((t) => ({
      query: t.query,
      answer: ANSWER_LABELS[t.answer] ?? t.answer,
    })),
    confidenceTrace: [...session.confidenceTrace],
    queryText: session.done ? null : session.pendingQuery,
    answersEnabled: session.canAnswer,
    diagnosisCard: diagnosis
      ? {
          disease: diagnosis.disease,
          bars: Object.entries(diagnosis.probs)
            .sort((a, b) => b[1] - a[1])
            .map(([disease, p]) => ({
              disease,
              percent: Math.round(p * 1000) / 10,
            })),
          stopReason: diagnosis.stop_reason,
          turns: diagnosis.turn,
        }
      : null,
  };
}

/** Points for an SVG polyline over the confidence history, y in [0, 1]. */
export function sparklinePoints(
  trace: number[],
  width = 160,
  height = 40,
): string {
  if (trace.length === 0) {
    return "";
  }
  if (trace.length === 1) {
    return `0,${(1 - trace[0]) * height} ${width},${(1 - trace[0]) * height}`;
  }
  const dx = width / (trace.length - 1);
  return trace
    .map((c, i) => `${Math.round(i * dx * 10) / 10},${Math.round((1 - c) * height * 10) / 10}`)
    .join(" ");
}
