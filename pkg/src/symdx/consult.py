"""Session driver for live consultations.

Shared by the HTTP service and the terminal client so both expose exactly
the trajectory an offline greedy rollout would produce: check the stopping
criterion on the current symptoms, emit the next greedy query, fold in the
answer, repeat until the confidence threshold or the turn budget fires.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import Attribute, CorpusError, Vocabulary
from .env import (
    STOP_MAX_TURNS,
    STOP_THRESHOLD,
    DialogueState,
    classifier_view,
    mark_stopped,
)
from .model import DiagnosisModel


class ConsultError(ValueError):
    pass


@dataclass
class Consultation:
    """Mutable live-session state: dialogue value plus the pending query."""

    state: DialogueState
    pending_query: Optional[int] = None
    confidence_trace: list[float] = field(default_factory=list)

    @property
    def stopped(self) -> bool:
        return self.state.stopped is not None

    @property
    def turn(self) -> int:
        return self.state.turn

    @property
    def confidence(self) -> float:
        return self.confidence_trace[-1] if self.confidence_trace else 0.0


class ConsultationDriver:
    """Runs consultations over a loaded model with fixed stopping policy."""

    def __init__(
        self,
        model: DiagnosisModel,
        vocab: Vocabulary,
        epsilon: float = 0.99,
        max_turns: int = 10,
    ):
        if max_turns < 1:
            raise ConsultError("max_turns must be >= 1")
        self.model = model
        self.vocab = vocab
        self.epsilon = epsilon
        self.max_turns = max_turns

    def resolve_explicit(self, explicit: list[list[str]]) -> tuple[tuple[int, Attribute], ...]:
        if not explicit:
            raise ConsultError("at least one explicit symptom is required")
        pairs = []
        seen = set()
        for item in explicit:
            if len(item) != 2:
                raise ConsultError(f"malformed explicit entry {item!r}")
            name, attr = item
            if attr not in ("POS", "NEG"):
                raise ConsultError(f"explicit attribute must be POS or NEG, got {attr!r}")
            try:
                sid = self.vocab.symptom_id(name)
            except CorpusError as e:
                raise ConsultError(str(e)) from e
            if sid in seen:
                raise ConsultError(f"duplicate explicit symptom {name!r}")
            seen.add(sid)
            pairs.append((sid, Attribute(attr)))
        return tuple(pairs)

    def start(self, explicit: list[list[str]]) -> Consultation:
        session = Consultation(DialogueState(explicit=self.resolve_explicit(explicit)))
        self._advance(session)
        return session

    def answer(self, session: Consultation, attribute: str) -> None:
        """Fold a human answer to the pending query into the session."""
        if session.stopped:
            raise ConsultError("session already stopped")
        if session.pending_query is None:
            raise ConsultError("no pending query to answer")
        if attribute not in ("POS", "NEG", "UNK"):
            raise ConsultError(f"attribute must be POS, NEG or UNK, got {attribute!r}")
        state = session.state
        session.state = DialogueState(
            explicit=state.explicit,
            asked=state.asked + ((session.pending_query, Attribute(attribute)),),
        )
        session.pending_query = None
        self._advance(session)

    def _advance(self, session: Consultation) -> None:
        """Stop on confidence or budget, otherwise queue the next greedy query."""
        probs = self.model.classify(classifier_view(session.state))
        session.confidence_trace.append(float(probs.max()))
        if float(probs.max()) >= self.epsilon:
            self._finish(session, STOP_THRESHOLD, probs)
            return
        if session.state.turn >= self.max_turns:
            self._finish(session, STOP_MAX_TURNS, probs)
            return
        mask = self.model.action_mask(session.state)
        if not mask.any():
            self._finish(session, STOP_MAX_TURNS, probs)
            return
        sid, _ = self.model.next_symptom(session.state.context, mask, mode="greedy")
        session.pending_query = sid

    def _finish(self, session: Consultation, reason: str, probs: np.ndarray) -> None:
        session.state = mark_stopped(session.state, reason, int(np.argmax(probs)), probs)
        session.pending_query = None

    def diagnosis_payload(self, session: Consultation) -> Optional[dict]:
        if not session.stopped:
            return None
        probs = session.state.probabilities
        return {
            "disease": self.vocab.disease_name(session.state.diagnosis),
            "probs": {
                self.vocab.disease_name(i): p for i, p in enumerate(probs)
            },
            "stop_reason": session.state.stopped,
            "turn": session.state.turn,
        }

    def query_name(self, session: Consultation) -> Optional[str]:
        if session.pending_query is None:
            return None
        return self.vocab.symptom_name(session.pending_query)
