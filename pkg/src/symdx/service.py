"""HTTP inference service exposing consultation sessions over a checkpoint.

Sessions live in memory with TTL eviction; symptom names travel on the wire,
ids stay internal. Each session's handlers are serialized by a per-session
lock; model parameters are shared read-only.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import __version__
from .consult import Consultation, ConsultationDriver, ConsultError
from .corpus import Vocabulary
from .model import DiagnosisModel


class StartRequest(BaseModel):
    explicit: list[list[str]]


class AnswerRequest(BaseModel):
    attribute: str
    turn: Optional[int] = None  # optional guard against double-submitted answers


@dataclass
class SessionEntry:
    id: str
    consultation: Consultation
    created_at: float
    last_access: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """In-memory session table with idle-TTL eviction and a hard cap."""

    def __init__(self, ttl: float, cap: int):
        self.ttl = ttl
        self.cap = cap
        self._sessions: dict[str, SessionEntry] = {}
        self._lock = threading.Lock()

    def _evict(self, now: float) -> None:
        dead = [k for k, e in self._sessions.items() if now - e.last_access > self.ttl]
        for k in dead:
            del self._sessions[k]

    def create(self, consultation: Consultation) -> SessionEntry:
        now = time.monotonic()
        with self._lock:
            self._evict(now)
            if len(self._sessions) >= self.cap:
                raise HTTPException(429, "session capacity reached")
            entry = SessionEntry(uuid.uuid4().hex, consultation, now, now)
            self._sessions[entry.id] = entry
            return entry

    def get(self, session_id: str) -> SessionEntry:
        now = time.monotonic()
        with self._lock:
            self._evict(now)
            entry = self._sessions.get(session_id)
            if entry is None:
                raise HTTPException(404, "unknown session")
            entry.last_access = now
            return entry

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def create_app(
    model: DiagnosisModel,
    vocab: Vocabulary,
    epsilon: float = 0.99,
    max_turns: int = 10,
    session_ttl: float = 1800.0,
    session_cap: int = 256,
    cors_origin: Optional[str] = None,
    checkpoint_hash: str = "unset",
) -> FastAPI:
    driver = ConsultationDriver(model, vocab, epsilon=epsilon, max_turns=max_turns)
    store = SessionStore(ttl=session_ttl, cap=session_cap)
    app = FastAPI(title="symdx consultation service")
    if cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def turn_payload(consultation: Consultation) -> dict:
        return {
            "query": driver.query_name(consultation),
            "diagnosis": driver.diagnosis_payload(consultation),
            "turn": consultation.turn,
            "confidence": consultation.confidence,
        }

    @app.post("/api/sessions")
    def start_session(req: StartRequest):
        try:
            consultation = driver.start(req.explicit)
        except ConsultError as e:
            raise HTTPException(400, str(e)) from e
        entry = store.create(consultation)
        return {"session_id": entry.id, **turn_payload(consultation)}

    @app.post("/api/sessions/{session_id}/answer")
    def answer(session_id: str, req: AnswerRequest):
        entry = store.get(session_id)
        with entry.lock:
            consultation = entry.consultation
            if consultation.stopped:
                raise HTTPException(409, "session already diagnosed")
            if req.turn is not None and req.turn != consultation.turn:
                raise HTTPException(
                    409, f"turn mismatch: session is at turn {consultation.turn}"
                )
            try:
                driver.answer(consultation, req.attribute)
            except ConsultError as e:
                raise HTTPException(400, str(e)) from e
            return turn_payload(consultation)

    @app.get("/api/sessions/{session_id}")
    def snapshot(session_id: str):
        entry = store.get(session_id)
        with entry.lock:
            consultation = entry.consultation
            return {
                "session_id": entry.id,
                "context": [
                    [vocab.symptom_name(s), a.value]
                    for s, a in consultation.state.context
                ],
                "turn": consultation.turn,
                "pending_query": driver.query_name(consultation),
                "stopped": consultation.state.stopped,
                "confidence_trace": list(consultation.confidence_trace),
                "diagnosis": driver.diagnosis_payload(consultation),
            }

    @app.get("/api/vocab")
    def get_vocab():
        return {"symptoms": vocab.symptoms, "diseases": vocab.diseases}

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "checkpoint_hash": checkpoint_hash,
            "vocab_hash": vocab.content_hash(),
            "epsilon": epsilon,
            "max_turns": max_turns,
            "active_sessions": len(store),
        }

    return app
