/**
 * DOM layer: renders the derived view into the static page and wires the
 * controls. Symptom names come from the vocabulary verbatim (UTF-8 as-is).
 */

import { ServiceClient } from "./api.js";
import { ConsoleSession } from "./session.js";
import { ANSWER_LABELS, deriveView, sparklinePoints } from "./view.js";

type Explicit = Map<string, "POS" | "NEG">;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class ConsoleApp {
  private session: ConsoleSession | null = null;
  private explicit: Explicit = new Map();
  private symptoms: string[] = [];

  constructor(private readonly api: ServiceClient) {}

  async init(): Promise<void> {
    try {
      const vocab = await this.api.getVocab();
      this.symptoms = vocab.symptoms;
      const datalist = el<HTMLDataListElement>("symptom-options");
      datalist.replaceChildren(
        ...vocab.symptoms.map((s) => {
          const option = document.createElement("option");
          option.value = s;
          return option;
        }),
      );
      this.showError(null);
    } catch (err) {
      this.showError(`cannot reach the service: ${(err as Error).message}`, () =>
        this.init(),
      );
    }
    el<HTMLButtonElement>("add-symptom").onclick = () => this.addSymptom();
    el<HTMLInputElement>("symptom-input").onkeydown = (ev) => {
      if (ev.key === "Enter") this.addSymptom();
    };
    el<HTMLButtonElement>("start").onclick = () => void this.start();
    for (const attr of ["POS", "NEG", "UNK"] as const) {
      el<HTMLButtonElement>(`answer-${attr}`).onclick = () => void this.answer(attr);
    }
    this.renderSetup();
  }

  private addSymptom(): void {
    const input = el<HTMLInputElement>("symptom-input");
    const name = input.value.trim();
    if (!name) return;
    if (!this.symptoms.includes(name)) {
      this.showError(`"${name}" is not a known symptom`);
      return;
    }
    this.explicit.set(name, "POS");
    input.value = "";
    this.showError(null);
    this.renderSetup();
  }

  private async start(): Promise<void> {
    if (this.explicit.size === 0) return;
    const explicit: [string, "POS" | "NEG"][] = [...this.explicit.entries()];
    try {
      this.session = await ConsoleSession.start(this.api, explicit);
      this.showError(null);
      el("setup").hidden = true;
      el("consultation").hidden = false;
      this.render();
    } catch (err) {
      this.showError(`could not start: ${(err as Error).message}`, () =>
        this.start(),
      );
    }
  }

  private async answer(attr: "POS" | "NEG" | "UNK"): Promise<void> {
    if (!this.session) return;
    this.render(); // disable buttons while the request is pending
    try {
      await this.session.answer(attr);
      this.showError(null);
    } catch (err) {
      this.showError(`answer failed: ${(err as Error).message}`);
    }
    this.render();
  }

  private renderSetup(): void {
    const chips = el("chips");
    chips.replaceChildren(
      ...[...this.explicit.entries()].map(([name, attr]) => {
        const chip = document.createElement("span");
        chip.className = "chip";
        const label = document.createElement("span");
        label.textContent = `${name}: ${attr}`;
        const toggle = document.createElement("button");
        toggle.textContent = "toggle";
        toggle.onclick = () => {
          this.explicit.set(name, attr === "POS" ? "NEG" : "POS");
          this.renderSetup();
        };
        const remove = document.createElement("button");
        remove.textContent = "x";
        remove.onclick = () => {
          this.explicit.delete(name);
          this.renderSetup();
        };
        chip.append(label, toggle, remove);
        return chip;
      }),
    );
    el<HTMLButtonElement>("start").disabled = this.explicit.size === 0;
  }

  render(): void {
    if (!this.session) return;
    const view = deriveView(this.session);

    const transcript = el("transcript");
    transcript.replaceChildren(
      ...view.transcript.map((entry) => {
        const row = document.createElement("li");
        row.textContent = `${entry.query} — ${entry.answer}`;
        return row;
      }),
    );

    el("sparkline-path").setAttribute(
      "points",
      sparklinePoints(view.confidenceTrace),
    );
    const last = view.confidenceTrace[view.confidenceTrace.length - 1] ?? 0;
    el("confidence-label").textContent = `confidence ${(last * 100).toFixed(1)}%`;

    const queryCard = el("query-card");
    queryCard.hidden = view.queryText === null;
    if (view.queryText !== null) {
      el("query-text").textContent = `Do you have: ${view.queryText}?`;
    }
    for (const attr of ["POS", "NEG", "UNK"] as const) {
      el<HTMLButtonElement>(`answer-${attr}`).disabled = !view.answersEnabled;
    }

    const card = el("diagnosis-card");
    card.hidden = view.diagnosisCard === null;
    if (view.diagnosisCard) {
      el("diagnosis-disease").textContent = view.diagnosisCard.disease;
      el("diagnosis-meta").textContent =
        `after ${view.diagnosisCard.turns} question(s), ` +
        `stopped by ${view.diagnosisCard.stopReason}`;
      el("diagnosis-bars").replaceChildren(
        ...view.diagnosisCard.bars.map((bar) => {
          const row = document.createElement("div");
          row.className = "bar-row";
          const label = document.createElement("span");
          label.textContent = `${bar.disease} ${bar.percent.toFixed(1)}%`;
          const track = document.createElement("div");
          track.className = "bar-track";
          const fill = document.createElement("div");
          fill.className = "bar-fill";
          fill.style.width = `${bar.percent}%`;
          track.append(fill);
          row.append(label, track);
          return row;
        }),
      );
    }
  }

  private showError(message: string | null, retry?: () => void): void {
    const strip = el("error-strip");
    strip.hidden = message === null;
    el("error-text").textContent = message ?? "";
    const button = el<HTMLButtonElement>("error-retry");
    button.hidden = !retry;
    button.onclick = retry ? () => void retry() : null;
  }
}

export { ANSWER_LABELS };
