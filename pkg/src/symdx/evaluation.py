"""Metrics, accuracy-bound reference classifier, rule-based baseline, sweeps.

Symptom recall is the corpus-level ratio of recovered implicit symptoms to
all implicit symptoms (summed separately, not averaged per record). The
bound classifier brackets reasonable agent accuracy: explicit-only features
give the lower bound, full symptom sets the upper bound.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import GridSearchCV
from sklearn.svm import LinearSVC

from .corpus import Attribute, CoOccurrence, StructuredMCR, Vocabulary
from .env import DialogueState, Trajectory, classifier_view
from .model import DiagnosisModel
from .training import InquiryPolicy, rollout

FEATURE_MODES = ("LB", "UB", "UB_P", "UB_N")

DEFAULT_C_GRID = tuple(10.0**e for e in range(-3, 3))  # fixed log-spaced penalty grid


class EvalError(RuntimeError):
    pass


@dataclass
class EvalReport:
    sx_recall: float
    dx_accuracy: float
    mean_turns: float
    n_records: int
    per_disease_accuracy: dict[str, float]
    stop_reasons: dict[str, int]
    config_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "sx_recall": self.sx_recall,
            "dx_accuracy": self.dx_accuracy,
            "mean_turns": self.mean_turns,
            "n_records": self.n_records,
            "per_disease_accuracy": self.per_disease_accuracy,
            "stop_reasons": self.stop_reasons,
            "config_fingerprint": self.config_fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class BoundsEntry:
    mode: str
    test_accuracy: float
    cv_fold_scores: list[float]
    best_penalty: float

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "test_accuracy": self.test_accuracy,
            "cv_fold_scores": self.cv_fold_scores,
            "best_penalty": self.best_penalty,
        }


@dataclass
class BoundsReport:
    entries: dict[str, BoundsEntry] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {mode: e.to_dict() for mode, e in self.entries.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- metrics -------------------------------------------------------------------


def symptom_recall(pairs: Sequence[tuple[Trajectory, StructuredMCR]]) -> float:
    """Corpus ratio: sum of |asked ∩ implicit| over sum of |implicit|."""
    hit = total = 0
    for traj, record in pairs:
        implicit = set(record.implicit_ids)
        hit += len(set(traj.state.asked_ids) & implicit)
        total += len(implicit)
    if total == 0:
        raise EvalError("no implicit symptoms anywhere in the evaluated corpus")
    return hit / total


def evaluate(
    model: DiagnosisModel,
    records: Sequence[StructuredMCR],
    t_max: int = 10,
    epsilon: Optional[float] = 0.99,
    policy: Optional[InquiryPolicy] = None,
    vocab: Optional[Vocabulary] = None,
    threads: int = 1,
) -> EvalReport:
    """Greedy rollouts with the stopping criterion over a whole split.

    Rollouts are independent and read the parameters only, so they may run
    on a thread pool; results keep record order either way.
    """
    if not records:
        raise EvalError("no records to evaluate")

    def run(rec):
        return rollout(model, rec, mode="greedy", t_max=t_max,
                       epsilon=epsilon, policy=policy)

    if threads > 1 and policy is None:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajectories = list(pool.map(run, records))
    else:
        trajectories = [run(rec) for rec in records]
    return summarize(trajectories, records, t_max, epsilon, model, vocab)


def summarize(
    trajectories: Sequence[Trajectory],
    records: Sequence[StructuredMCR],
    t_max: int,
    epsilon: Optional[float],
    model: Optional[DiagnosisModel] = None,
    vocab: Optional[Vocabulary] = None,
) -> EvalReport:
    correct = 0
    turns = 0
    by_disease: dict[int, list[int]] = {}
    reasons: dict[str, int] = {}
    for traj, rec in zip(trajectories, records):
        ok = int(traj.predicted == rec.disease)
        correct += ok
        turns += traj.state.turn
        by_disease.setdefault(rec.disease, []).append(ok)
        reasons[traj.state.stopped] = reasons.get(traj.state.stopped, 0) + 1
    name = vocab.disease_name if vocab is not None else str
    per_disease = {
        name(d): float(np.mean(v)) for d, v in sorted(by_disease.items())
    }
    fingerprint = hashlib.sha256(
        json.dumps(
            {
                "t_max": t_max,
                "epsilon": epsilon,
                "n_records": len(records),
                "params": model.params_hash() if model is not None else None,
            },
            sort_keys=True,
        ).encode()
    ).hexdigest()[:16]
    return EvalReport(
        sx_recall=symptom_recall(list(zip(trajectories, records))),
        dx_accuracy=correct / len(records),
        mean_turns=turns / len(records),
        n_records=len(records),
        per_disease_accuracy=per_disease,
        stop_reasons=reasons,
        config_fingerprint=fingerprint,
    )


# -- accuracy bounds -----------------------------------------------------------


def signed_features(
    records: Sequence[StructuredMCR], mode: str, n_symptoms: int
) -> np.ndarray:
    """Signed bag-of-symptoms in {-1, 0, +1}: POS -> +1, NEG -> -1, absent 0.

    LB uses explicit pairs only; UB adds all implicit pairs; UB_P only the
    positive implicit pairs; UB_N only the negative ones.
    """
    if mode not in FEATURE_MODES:
        raise EvalError(f"unknown feature mode {mode!r}, expected one of {FEATURE_MODES}")
    x = np.zeros((len(records), n_symptoms))
    for i, rec in enumerate(records):
        pairs = list(rec.explicit)
        if mode == "UB":
            pairs += list(rec.implicit)
        elif mode == "UB_P":
            pairs += [(s, a) for s, a in rec.implicit if a is Attribute.POS]
        elif mode == "UB_N":
            pairs += [(s, a) for s, a in rec.implicit if a is Attribute.NEG]
        for sid, attr in pairs:
            x[i, sid - 1] = 1.0 if attr is Attribute.POS else -1.0
    return x


def bounds(
    records_train: Sequence[StructuredMCR],
    records_test: Sequence[StructuredMCR],
    feature_mode: str,
    n_symptoms: int,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
) -> BoundsEntry:
    """Maximum-margin linear classifier (one-vs-rest, hinge loss, L2 penalty);
    the penalty weight is chosen by five-fold cross-validation on the train
    split and accuracy is reported on the test split."""
    x_train = signed_features(records_train, feature_mode, n_symptoms)
    y_train = np.array([r.disease for r in records_train])
    x_test = signed_features(records_test, feature_mode, n_symptoms)
    y_test = np.array([r.disease for r in records_test])
    if len(np.unique(y_train)) < 2:
        raise EvalError("training split has a single disease class")
    search = GridSearchCV(
        LinearSVC(loss="hinge", max_iter=50000, random_state=0),
        {"C": list(c_grid)},
        cv=5,
        n_jobs=1,
    )
    search.fit(x_train, y_train)
    best_idx = int(search.best_index_)
    folds = [
        float(search.cv_results_[f"split{i}_test_score"][best_idx]) for i in range(5)
    ]
    return BoundsEntry(
        mode=feature_mode,
        test_accuracy=float(search.score(x_test, y_test)),
        cv_fold_scores=folds,
        best_penalty=float(search.best_params_["C"]),
    )


def bounds_report(
    records_train: Sequence[StructuredMCR],
    records_test: Sequence[StructuredMCR],
    n_symptoms: int,
    modes: Sequence[str] = FEATURE_MODES,
) -> BoundsReport:
    report = BoundsReport()
    for mode in modes:
        report.entries[mode] = bounds(records_train, records_test, mode, n_symptoms)
    return report


# -- rule-based baseline ---------------------------------------------------------


def rule_agent_next(
    collected: Sequence[tuple[int, Attribute]],
    cooc: CoOccurrence,
    mask: np.ndarray,
    aggregation: str = "sum",
) -> int:
    """Most co-occurrence-correlated unasked symptom given the collected set.

    score(s) aggregates symptom_symptom[s][s'] / marginal[s'] over collected
    symptoms s'; ties break toward the smallest id.
    """
    if not mask.any():
        raise EvalError("no permitted actions")
    scores = np.zeros(mask.shape[0])
    contributions = []
    for sid, _ in collected:
        m = cooc.symptom_marginal[sid]
        if m > 0:
            contributions.append(cooc.symptom_symptom[:, sid] / m)
    if contributions:
        stacked = np.stack(contributions)
        scores = stacked.sum(axis=0) if aggregation == "sum" else stacked.max(axis=0)
    scores = np.where(mask, scores, -np.inf)
    return int(np.argmax(scores))


@dataclass
class RuleAgentPolicy:
    """Inquiry policy wrapping rule_agent_next for rollouts."""

    cooc: CoOccurrence
    aggregation: str = "sum"

    def choose(self, state: DialogueState, mask: np.ndarray, rng) -> int:
        return rule_agent_next(classifier_view(state), self.cooc, mask, self.aggregation)


# -- sweeps ----------------------------------------------------------------------


def sweep(
    model: DiagnosisModel,
    records: Sequence[StructuredMCR],
    axis: str,
    values: Sequence[float],
    t_max: int = 10,
    epsilon: Optional[float] = 0.99,
    policy: Optional[InquiryPolicy] = None,
    vocab: Optional[Vocabulary] = None,
    threads: int = 1,
) -> list[tuple[float, EvalReport]]:
    """One evaluate() per grid point along t_max or epsilon."""
    if axis not in ("t_max", "epsilon"):
        raise EvalError(f"unknown sweep axis {axis!r}")
    if not values:
        raise EvalError("empty sweep grid")
    rows = []
    for v in values:
        if axis == "t_max":
            report = evaluate(model, records, t_max=int(v), epsilon=epsilon,
                              policy=policy, vocab=vocab, threads=threads)
        else:
            report = evaluate(model, records, t_max=t_max, epsilon=float(v),
                              policy=policy, vocab=vocab, threads=threads)
        rows.append((float(v), report))
    return rows


SWEEP_HEADER = ["axis-value", "sx_recall", "dx_accuracy", "mean_turns"]


def write_sweep_csv(rows: Sequence[tuple[float, EvalReport]], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SWEEP_HEADER)
        for value, report in rows:
            w.writerow(
                [value, f"{report.sx_recall:.6f}", f"{report.dx_accuracy:.6f}",
                 f"{report.mean_turns:.4f}"]
            )


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sx_recall", "dx_accuracy", "mean_turns", "n_records"])
        w.writerow(
            [f"{report.sx_recall:.6f}", f"{report.dx_accuracy:.6f}",
             f"{report.mean_turns:.4f}", report.n_records]
        )
