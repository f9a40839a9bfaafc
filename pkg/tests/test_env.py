import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_records
from symdx.corpus import Attribute, Vocabulary, build_vocabulary, resolve_records
from symdx.env import (
    EnvError,
    PatientSimulator,
    Trajectory,
    classifier_view,
    mark_stopped,
    new_session,
    respond,
    step,
)

RAW = [
    {"id": "1", "disease": "URI",
     "explicit": [["cough", "POS"]],
     "implicit": [["fever", "POS"], ["rash", "NEG"]]},
]


@pytest.fixture
def setup():
    vocab = build_vocabulary(RAW)
    record = resolve_records(RAW, vocab)[0]
    return vocab, record, PatientSimulator(record)


class TestRespond:
    def test_implicit_lookup(self, setup):
        vocab, record, sim = setup
        assert respond(sim, vocab.symptom_id("fever")) is Attribute.POS
        assert respond(sim, vocab.symptom_id("rash")) is Attribute.NEG

    def test_absent_symptom_is_unk(self, setup):
        vocab, _, sim = setup
        # 'cough' is explicit-only; a fourth symptom is entirely absent
        assert respond(sim, vocab.symptom_id("cough")) is Attribute.UNK

    def test_invalid_id(self, setup):
        _, _, sim = setup
        with pytest.raises(EnvError):
            respond(sim, 0)


class TestStep:
    def test_appends_response(self, setup):
        vocab, record, sim = setup
        state = new_session(record)
        fever = vocab.symptom_id("fever")
        state = step(state, sim, fever)
        assert state.turn == 1
        assert state.context[-1] == (fever, Attribute.POS)
        assert state.asked_ids == (fever,)

    def test_repeat_query_rejected(self, setup):
        vocab, record, sim = setup
        state = step(new_session(record), sim, vocab.symptom_id("fever"))
        with pytest.raises(EnvError, match="already"):
            step(state, sim, vocab.symptom_id("fever"))

    def test_explicit_query_rejected(self, setup):
        vocab, record, sim = setup
        with pytest.raises(EnvError, match="already"):
            step(new_session(record), sim, vocab.symptom_id("cough"))

    def test_stopped_session_rejects_steps(self, setup):
        vocab, record, sim = setup
        state = mark_stopped(new_session(record), "max_turns", 0, [1.0])
        with pytest.raises(EnvError, match="stopped"):
            step(state, sim, vocab.symptom_id("fever"))

    def test_deterministic(self, setup):
        vocab, record, sim = setup
        fever = vocab.symptom_id("fever")
        a = step(new_session(record), sim, fever)
        b = step(new_session(record), sim, fever)
        assert a == b


WIDE_RAW = RAW + [
    {"id": "2", "disease": "flu", "explicit": [["ache", "POS"]], "implicit": []},
]


class TestClassifierView:
    @pytest.fixture
    def wide(self):
        vocab = build_vocabulary(WIDE_RAW)
        record = resolve_records(WIDE_RAW, vocab)[0]
        return vocab, record, PatientSimulator(record)

    def test_unk_stripped(self, wide):
        vocab, record, sim = wide
        state = new_session(record)
        state = step(state, sim, vocab.symptom_id("fever"))  # POS, kept
        state = step(state, sim, vocab.symptom_id("ache"))   # UNK, dropped
        assert classifier_view(state) == [
            (vocab.symptom_id("cough"), Attribute.POS),
            (vocab.symptom_id("fever"), Attribute.POS),
        ]
        # the UNK answer stays in the decoder-facing context
        assert state.context[-1] == (vocab.symptom_id("ache"), Attribute.UNK)

    def test_no_inquiries_gives_explicit_only(self, wide):
        _, record, _ = wide
        assert classifier_view(new_session(record)) == list(record.explicit)

    def test_all_unk_gives_explicit_only(self, wide):
        vocab, record, sim = wide
        state = step(new_session(record), sim, vocab.symptom_id("ache"))
        assert classifier_view(state) == list(record.explicit)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_simulator_completeness_and_soundness(seed):
    """Exhaustively querying every symptom recovers exactly the implicit
    pairs; every non-UNK response comes from the implicit list."""
    rng = np.random.default_rng(seed)
    raw = random_records(rng, 1, n_symptoms=10, n_diseases=2)
    vocab = Vocabulary([f"s{i:03d}" for i in range(10)], ["d0", "d1", "d2"])
    record = resolve_records(raw, vocab)[0]
    sim = PatientSimulator(record)
    state = new_session(record)
    recovered = []
    for sid in range(1, vocab.n_symptoms + 1):
        if sid in state.forbidden_ids():
            continue
        state = step(state, sim, sid)
        if state.asked[-1][1] is not Attribute.UNK:
            recovered.append(state.asked[-1])
    assert sorted(recovered) == sorted(record.implicit)
    non_unk = [p for p in state.asked if p[1] is not Attribute.UNK]
    assert set(non_unk) <= set(record.implicit)


def test_trajectory_reward_length_invariant(setup):
    vocab, record, sim = setup
    state = step(new_session(record), sim, vocab.symptom_id("fever"))
    state = mark_stopped(state, "max_turns", 0, [0.5, 0.5])
    with pytest.raises(ValueError, match="rewards"):
        Trajectory(state=state, true_disease=0, predicted=0, step_rewards=(1.0, 2.0))
    ok = Trajectory(state=state, true_disease=0, predicted=0, step_rewards=(1.0,))
    assert ok.step_rewards == (1.0,)
