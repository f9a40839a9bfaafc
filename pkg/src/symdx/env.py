"""Patient simulator and dialogue session state.

The simulator answers a symptom query with the attribute recorded among the
hidden record's implicit symptoms, or UNK for anything else (explicit
symptoms included). DialogueState is a value: stepping returns a new state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .corpus import Attribute, StructuredMCR

STOP_THRESHOLD = "threshold"
STOP_MAX_TURNS = "max_turns"


class EnvError(RuntimeError):
    """Violation of the session protocol (repeat query, stepping when stopped)."""


@dataclass(frozen=True)
class PatientSimulator:
    """Pure response function over one hidden consultation record."""

    record: StructuredMCR

    def respond(self, symptom: int) -> Attribute:
        if symptom < 1:
            raise EnvError(f"invalid symptom id: {symptom}")
        for s, a in self.record.implicit:
            if s == symptom:
                return a
        return Attribute.UNK


def respond(sim: PatientSimulator, symptom: int) -> Attribute:
    return sim.respond(symptom)


@dataclass(frozen=True)
class DialogueState:
    """Ordered session context: explicit pairs followed by asked pairs with
    simulator responses. Once `stopped` is set no further inquiries are
    accepted."""

    explicit: tuple[tuple[int, Attribute], ...]
    asked: tuple[tuple[int, Attribute], ...] = ()
    stopped: Optional[str] = None
    diagnosis: Optional[int] = None
    probabilities: Optional[tuple[float, ...]] = None

    @property
    def turn(self) -> int:
        return len(self.asked)

    @property
    def context(self) -> tuple[tuple[int, Attribute], ...]:
        return self.explicit + self.asked

    @property
    def asked_ids(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.asked)

    @property
    def explicit_ids(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.explicit)

    def forbidden_ids(self) -> frozenset[int]:
        return frozenset(self.explicit_ids) | frozenset(self.asked_ids)


def new_session(record: StructuredMCR) -> DialogueState:
    return DialogueState(explicit=record.explicit)


def step(state: DialogueState, sim: PatientSimulator, symptom: int) -> DialogueState:
    """Query one symptom and fold the response into the context."""
    if state.stopped is not None:
        raise EnvError("session already stopped")
    if symptom in state.forbidden_ids():
        raise EnvError(f"symptom {symptom} was already asked or is explicit")
    answer = sim.respond(symptom)
    return replace(state, asked=state.asked + ((symptom, answer),))


def mark_stopped(
    state: DialogueState,
    reason: str,
    diagnosis: int,
    probabilities: Sequence[float],
) -> DialogueState:
    if reason not in (STOP_THRESHOLD, STOP_MAX_TURNS):
        raise ValueError(f"unknown stop reason {reason!r}")
    return replace(
        state,
        stopped=reason,
        diagnosis=diagnosis,
        probabilities=tuple(float(p) for p in probabilities),
    )


def classifier_view(state: DialogueState) -> list[tuple[int, Attribute]]:
    """Features for the disease classifier: explicit pairs plus asked pairs
    whose response was POS or NEG. UNK answers stay in the decoder context
    but carry no information about the patient, so they are dropped here."""
    return [(s, a) for s, a in state.context if a is not Attribute.UNK]


@dataclass(frozen=True)
class Trajectory:
    """Outcome of one rolled-out session.

    step_rewards is None for evaluation rollouts where rewards were not
    requested; when present its length equals the final turn count.
    """

    state: DialogueState
    true_disease: int
    predicted: int
    step_rewards: Optional[tuple[float, ...]] = None
    step_log_probs: Optional[tuple[float, ...]] = None
    confidence_trace: tuple[float, ...] = ()

    def __post_init__(self):
        if self.step_rewards is not None and len(self.step_rewards) != self.state.turn:
            raise ValueError(
                f"{len(self.step_rewards)} rewards for {self.state.turn} turns"
            )
