"""Rewards, rollouts, language-model pretraining and joint optimization.

Joint training follows a decoupled recipe per record: a sampling rollout
collects per-step rewards for the policy-gradient surrogate, a greedy rollout
provides the symptom set whose classification drives the cross-entropy term,
and both losses backpropagate together into the shared embeddings.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from . import nn
from .corpus import Attribute, CoOccurrence, StructuredMCR
from .env import (
    STOP_MAX_TURNS,
    STOP_THRESHOLD,
    DialogueState,
    PatientSimulator,
    Trajectory,
    classifier_view,
    mark_stopped,
    new_session,
    step,
)
from .model import DiagnosisModel, save_checkpoint
from .nn import Tensor


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RewardConfig:
    """Per-query reward components (dimensionless units)."""

    priori_pos: float = 1.0
    priori_neg: float = -1.0
    ground_hit: float = 2.5
    ground_miss: float = -0.5

    def __post_init__(self):
        if not (self.priori_pos > 0 > self.priori_neg):
            raise ValueError("priori rewards must straddle zero")
        if not (self.ground_hit > 0 > self.ground_miss):
            raise ValueError("ground rewards must straddle zero")


@dataclass
class TrainConfig:
    t_max_train: int = 40
    t_max_infer: int = 10
    epsilon: float = 0.99
    pretrain_lr: float = 3e-4
    rl_lr: float = 1e-4
    batch_size: int = 16
    pretrain_epochs: int = 40
    rl_epochs: int = 10
    patience: int = 5
    grad_clip: float = 1.0
    seed: int = 0
    use_full_return: bool = False
    use_reward_baseline: bool = False
    baseline_momentum: float = 0.9
    freeze_decoder: bool = False  # keep decoder-stack weights fixed (shared embeddings still train)

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        if self.t_max_train < 1 or self.t_max_infer < 1:
            raise ValueError("turn budgets must be >= 1")


# -- rewards -------------------------------------------------------------------


def priori_reward(
    symptom: int, disease: int, cooc: CoOccurrence, cfg: RewardConfig = RewardConfig()
) -> float:
    """Positive iff the symptom ever co-occurs with the disease in training."""
    return cfg.priori_pos if cooc.cooccurs(disease, symptom) else cfg.priori_neg


def ground_reward(
    symptom: int, implicit_ids: frozenset[int] | set[int], cfg: RewardConfig = RewardConfig()
) -> float:
    """Positive iff the query uncovered one of the record's implicit symptoms."""
    return cfg.ground_hit if symptom in implicit_ids else cfg.ground_miss


def step_reward(
    symptom: int,
    record: StructuredMCR,
    cooc: CoOccurrence,
    cfg: RewardConfig = RewardConfig(),
) -> float:
    return priori_reward(symptom, record.disease, cooc, cfg) + ground_reward(
        symptom, frozenset(record.implicit_ids), cfg
    )


# -- rollouts ------------------------------------------------------------------


class InquiryPolicy(Protocol):
    """Pluggable symptom-selection strategy for rollouts and evaluation."""

    def choose(
        self, state: DialogueState, mask: np.ndarray, rng: Optional[np.random.Generator]
    ) -> int: ...


class StopInquiry(Exception):
    """Raised by a policy that has nothing left to ask; the session then
    closes as if the turn budget were exhausted."""


def rollout(
    model: DiagnosisModel,
    record: StructuredMCR,
    mode: str = "greedy",
    t_max: int = 10,
    rng: Optional[np.random.Generator] = None,
    epsilon: Optional[float] = None,
    reward_cfg: Optional[RewardConfig] = None,
    cooc: Optional[CoOccurrence] = None,
    policy: Optional[InquiryPolicy] = None,
) -> Trajectory:
    """Run one full session against the simulated patient.

    When `epsilon` is set the classifier runs on the collected symptoms after
    every turn (including before the first inquiry, mirroring the live
    service) and the session stops once the top disease probability reaches
    it. Rewards are recorded only when `reward_cfg` and `cooc` are given.
    """
    if t_max < 1:
        raise TrainingError("t_max must be >= 1")
    sim = PatientSimulator(record)
    state = new_session(record)
    want_rewards = reward_cfg is not None and cooc is not None
    rewards: list[float] = []
    log_probs: list[float] = []
    trace: list[float] = []
    probs: Optional[np.ndarray] = None
    reason: Optional[str] = None

    def check_threshold() -> bool:
        nonlocal probs
        probs = model.classify(classifier_view(state))
        trace.append(float(probs.max()))
        return epsilon is not None and float(probs.max()) >= epsilon

    if epsilon is not None and check_threshold():
        reason = STOP_THRESHOLD

    while reason is None and state.turn < t_max:
        mask = model.action_mask(state)
        if not mask.any():
            reason = STOP_MAX_TURNS
            break
        if policy is not None:
            try:
                sid = policy.choose(state, mask, rng)
            except StopInquiry:
                reason = STOP_MAX_TURNS
                break
            if not mask[sid]:
                raise TrainingError(f"policy chose a forbidden symptom {sid}")
        else:
            sid, lp = model.next_symptom(state.context, mask, mode, rng)
            log_probs.append(lp)
        state = step(state, sim, sid)
        if want_rewards:
            rewards.append(step_reward(sid, record, cooc, reward_cfg))
        if epsilon is not None and check_threshold():
            reason = STOP_THRESHOLD

    if reason is None:
        reason = STOP_MAX_TURNS
    if probs is None:
        probs = model.classify(classifier_view(state))
    predicted = int(np.argmax(probs))
    state = mark_stopped(state, reason, predicted, probs)
    return Trajectory(
        state=state,
        true_disease=record.disease,
        predicted=predicted,
        step_rewards=tuple(rewards) if want_rewards else None,
        step_log_probs=tuple(log_probs) if policy is None else None,
        confidence_trace=tuple(trace),
    )


# -- REINFORCE -----------------------------------------------------------------


def returns_to_go(rewards: Sequence[float], full_return: bool = False) -> np.ndarray:
    """G_t = sum of rewards from step t on; or the total return at every step."""
    r = np.asarray(rewards, dtype=np.float64)
    if full_return:
        return np.full_like(r, r.sum())
    return np.cumsum(r[::-1])[::-1].copy()


def reinforce_loss(
    step_log_probs: Tensor | Sequence[Tensor],
    rewards: Sequence[float],
    full_return: bool = False,
    baseline: float = 0.0,
) -> Tensor:
    """Surrogate whose gradient is the single-sample policy-gradient estimate:
    -sum_t log p(a_t) * G_t."""
    if isinstance(step_log_probs, Tensor):
        n = step_log_probs.shape[0]
    else:
        n = len(step_log_probs)
    if n != len(rewards):
        raise TrainingError(
            f"{n} log-probs vs {len(rewards)} rewards"
        )
    if n == 0:
        return Tensor(0.0)
    g = returns_to_go(rewards, full_return) - baseline
    if isinstance(step_log_probs, Tensor):
        return nn.sum_(nn.mul(step_log_probs, -g))
    total = nn.mul(step_log_probs[0], -float(g[0]))
    for t in range(1, n):
        total = nn.add(total, nn.mul(step_log_probs[t], -float(g[t])))
    return total


def asked_log_prob_tensors(
    model: DiagnosisModel, record: StructuredMCR, asked: Sequence[tuple[int, Attribute]]
) -> Tensor:
    """Recompute the log-probability of each asked symptom with the graph on.

    One teacher-forced pass over the final context yields every step's
    distribution at once (the causal mask guarantees each position only sees
    its own prefix); the per-step action mask is re-applied before
    normalizing, matching what the sampler saw.
    """
    k = len(record.explicit)
    m = len(asked)
    if m == 0:
        raise TrainingError("no asked symptoms to score")
    context = list(record.explicit) + list(asked)
    all_logits = model.decoder_all_logits(context)
    rows = [k - 1 + t for t in range(m)]
    picked = nn.take_rows(all_logits, rows)  # (m, slots)

    n_slots = model.config.n_symptom_slots
    additive = np.zeros((m, n_slots))
    forbidden = set(record.explicit_ids) | {0}
    for t, (sid, _) in enumerate(asked):
        additive[t, sorted(forbidden)] = nn.NEG_INF
        forbidden.add(sid)
    log_p = nn.log_softmax(nn.add(picked, additive), axis=-1)
    actions = [sid for sid, _ in asked]
    return nn.gather_pairs(log_p, list(range(m)), actions)


def pretrain_masks(
    record: StructuredMCR, n_slots: int
) -> np.ndarray:
    """Additive no-repeat masks for each implicit-position prediction."""
    m = len(record.implicit)
    additive = np.zeros((m, n_slots))
    forbidden = set(record.explicit_ids) | {0}
    for t, (sid, _) in enumerate(record.implicit):
        additive[t, sorted(forbidden)] = nn.NEG_INF
        forbidden.add(sid)
    return additive


def lm_loss(model: DiagnosisModel, record: StructuredMCR) -> Optional[Tensor]:
    """Next-symptom cross-entropy over the implicit sequence, averaged over
    positions; None when the record has nothing to predict."""
    m = len(record.implicit)
    if m == 0:
        return None
    k = len(record.explicit)
    all_logits = model.decoder_all_logits(list(record.all_pairs))
    rows = [k - 1 + t for t in range(m)]
    picked = nn.take_rows(all_logits, rows)
    masked = nn.add(picked, pretrain_masks(record, model.config.n_symptom_slots))
    log_p = nn.log_softmax(masked, axis=-1)
    targets = [sid for sid, _ in record.implicit]
    return nn.mean(nn.neg(nn.gather_pairs(log_p, list(range(m)), targets)))


def classifier_loss(model: DiagnosisModel, pairs, disease: int) -> Tensor:
    logits = model.classify_logits(pairs)
    return nn.cross_entropy(nn.reshape(logits, (-1,)), disease)


# -- optimization loops --------------------------------------------------------


@dataclass
class EpochMetrics:
    epoch: int
    objective: float
    ce_loss: float
    dev_objective: float
    dev_sx_recall: float
    dev_dx_accuracy: float
    dev_mean_turns: float

    def row(self) -> list:
        return [
            self.epoch,
            f"{self.objective:.6f}",
            f"{self.ce_loss:.6f}",
            f"{self.dev_objective:.6f}",
            f"{self.dev_sx_recall:.6f}",
            f"{self.dev_dx_accuracy:.6f}",
            f"{self.dev_mean_turns:.4f}",
        ]


METRICS_HEADER = [
    "epoch",
    "objective",
    "ce_loss",
    "dev_objective",
    "dev_sx_recall",
    "dev_dx_accuracy",
    "dev_mean_turns",
]


class RunDirectory:
    """Training artifacts: config snapshot, per-epoch metrics, best checkpoint."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    def write_config(self, payload: dict) -> None:
        (self.path / "config.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True), "utf-8"
        )

    def metrics_writer(self, name: str):
        f = open(self.path / name, "w", newline="")
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        return f, w

    def checkpoint_path(self, name: str = "best.ckpt") -> Path:
        return self.path / name


def _snapshot(model: DiagnosisModel) -> list[np.ndarray]:
    return [p.data.copy() for p in model.parameters()]


def _restore(model: DiagnosisModel, snap: list[np.ndarray]) -> None:
    for p, d in zip(model.parameters(), snap):
        p.data = d.copy()


def _dev_eval(model: DiagnosisModel, records, cfg: TrainConfig):
    from .evaluation import evaluate  # deferred: evaluation imports rollout

    report = evaluate(model, records, t_max=cfg.t_max_infer, epsilon=cfg.epsilon)
    return report.sx_recall, report.dx_accuracy, report.mean_turns


def pretrain(
    model: DiagnosisModel,
    train_records: Sequence[StructuredMCR],
    dev_records: Sequence[StructuredMCR],
    cfg: TrainConfig,
    run_dir: Optional[RunDirectory] = None,
    log: Callable[[str], None] = lambda s: None,
) -> list[EpochMetrics]:
    """Maximum-likelihood initialization: the decoder learns to continue the
    implicit sequence, the classifier trains on full ground-truth symptom
    sets. Early-stops on a dev-loss plateau and restores the best epoch."""
    if not train_records:
        raise TrainingError("empty training corpus")
    rng = np.random.default_rng(cfg.seed)
    opt = nn.Adam(_trainable(model, cfg), cfg.pretrain_lr)
    history: list[EpochMetrics] = []
    best = np.inf
    best_snap = _snapshot(model)
    stale = 0
    csv_handle = writer = None
    if run_dir is not None:
        csv_handle, writer = run_dir.metrics_writer("pretrain_metrics.csv")
    try:
        for epoch in range(1, cfg.pretrain_epochs + 1):
            order = rng.permutation(len(train_records))
            lm_sum = ce_sum = 0.0
            pending = 0
            for idx in order:
                rec = train_records[idx]
                loss_terms = []
                lm = lm_loss(model, rec)
                if lm is not None:
                    loss_terms.append(lm)
                    lm_sum += lm.item()
                ce = classifier_loss(model, rec.all_pairs, rec.disease)
                ce_sum += ce.item()
                loss_terms.append(ce)
                total = loss_terms[0]
                for t in loss_terms[1:]:
                    total = nn.add(total, t)
                total.backward()
                pending += 1
                if pending == cfg.batch_size:
                    _apply_grads(model, opt, pending, clip=None)
                    pending = 0
            if pending:
                _apply_grads(model, opt, pending, clip=None)

            dev_loss = _pretrain_dev_loss(model, dev_records)
            sx, acc, turns = _dev_eval(model, dev_records, cfg)
            metrics = EpochMetrics(
                epoch, lm_sum / len(train_records), ce_sum / len(train_records),
                dev_loss, sx, acc, turns,
            )
            history.append(metrics)
            if writer is not None:
                writer.writerow(metrics.row())
                csv_handle.flush()
            log(
                f"pretrain epoch {epoch}: lm {metrics.objective:.4f} "
                f"ce {metrics.ce_loss:.4f} dev {dev_loss:.4f}"
            )
            if dev_loss < best - 1e-6:
                best = dev_loss
                best_snap = _snapshot(model)
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    log(f"pretrain early stop at epoch {epoch}")
                    break
    finally:
        if csv_handle is not None:
            csv_handle.close()
    _restore(model, best_snap)
    return history


def _pretrain_dev_loss(model: DiagnosisModel, records) -> float:
    if not records:
        return float("nan")
    total = 0.0
    with nn.no_grad():
        for rec in records:
            lm = lm_loss(model, rec)
            ce = classifier_loss(model, rec.all_pairs, rec.disease)
            total += (lm.item() if lm is not None else 0.0) + ce.item()
    return total / len(records)


def _apply_grads(model: DiagnosisModel, opt: nn.Adam, count: int, clip: Optional[float]) -> None:
    for p in model.parameters():
        if p.grad is not None:
            p.grad /= count
    opt.step(clip_norm=clip)
    model.zero_grad()


def _trainable(model: DiagnosisModel, cfg: TrainConfig) -> list:
    if not cfg.freeze_decoder:
        return model.parameters()
    return [p for name, p in model.named_parameters() if not name.startswith("decoder.")]


def train_joint(
    model: DiagnosisModel,
    train_records: Sequence[StructuredMCR],
    dev_records: Sequence[StructuredMCR],
    cooc: CoOccurrence,
    cfg: TrainConfig,
    reward_cfg: RewardConfig = RewardConfig(),
    run_dir: Optional[RunDirectory] = None,
    log: Callable[[str], None] = lambda s: None,
    vocab_hash: Optional[str] = None,
) -> list[EpochMetrics]:
    """Joint REINFORCE + cross-entropy optimization from pretrained weights.

    Per record: one sampling rollout over the full training turn budget (no
    threshold stop) feeds the policy-gradient term; one greedy rollout feeds
    the classifier's cross-entropy. The best dev-accuracy epoch is kept.
    """
    if not train_records:
        raise TrainingError("empty training corpus")
    rng = np.random.default_rng(cfg.seed)
    opt = nn.Adam(_trainable(model, cfg), cfg.rl_lr)
    history: list[EpochMetrics] = []
    # dev accuracy picks the kept epoch; recall breaks ties so RL progress
    # on inquiry is not discarded once the classifier saturates
    best_key = (-1.0, -1.0)
    best_snap = _snapshot(model)
    stale = 0
    baseline = 0.0
    have_baseline = False
    csv_handle = writer = None
    if run_dir is not None:
        csv_handle, writer = run_dir.metrics_writer("train_metrics.csv")
    try:
        for epoch in range(1, cfg.rl_epochs + 1):
            order = rng.permutation(len(train_records))
            reward_sum = ce_sum = 0.0
            pending = 0
            t0 = time.time()
            for idx in order:
                rec = train_records[idx]
                sampled = rollout(
                    model, rec, mode="sample", t_max=cfg.t_max_train,
                    rng=rng, reward_cfg=reward_cfg, cooc=cooc,
                )
                reward_sum += sum(sampled.step_rewards)
                loss = None
                if sampled.state.turn > 0:
                    lp = asked_log_prob_tensors(model, rec, sampled.state.asked)
                    b = baseline if (cfg.use_reward_baseline and have_baseline) else 0.0
                    loss = reinforce_loss(
                        lp, sampled.step_rewards,
                        full_return=cfg.use_full_return, baseline=b,
                    )
                if cfg.use_reward_baseline:
                    total_r = sum(sampled.step_rewards)
                    baseline = (
                        total_r if not have_baseline
                        else cfg.baseline_momentum * baseline
                        + (1 - cfg.baseline_momentum) * total_r
                    )
                    have_baseline = True

                greedy = rollout(model, rec, mode="greedy", t_max=cfg.t_max_train)
                ce = classifier_loss(model, classifier_view(greedy.state), rec.disease)
                ce_sum += ce.item()
                loss = ce if loss is None else nn.add(loss, ce)
                loss.backward()
                pending += 1
                if pending == cfg.batch_size:
                    _apply_grads(model, opt, pending, clip=cfg.grad_clip)
                    pending = 0
            if pending:
                _apply_grads(model, opt, pending, clip=cfg.grad_clip)

            sx, acc, turns = _dev_eval(model, dev_records, cfg)
            metrics = EpochMetrics(
                epoch, reward_sum / len(train_records), ce_sum / len(train_records),
                float("nan"), sx, acc, turns,
            )
            history.append(metrics)
            if writer is not None:
                writer.writerow(metrics.row())
                csv_handle.flush()
            log(
                f"rl epoch {epoch}: reward {metrics.objective:.3f} "
                f"ce {metrics.ce_loss:.4f} dev acc {acc:.3f} sx {sx:.3f} "
                f"({time.time() - t0:.0f}s)"
            )
            if (acc, sx) > best_key:
                best_key = (acc, sx)
                best_snap = _snapshot(model)
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    log(f"rl early stop at epoch {epoch}")
                    break
    finally:
        if csv_handle is not None:
            csv_handle.close()
    _restore(model, best_snap)
    if run_dir is not None and vocab_hash is not None:
        save_checkpoint(model, vocab_hash, run_dir.checkpoint_path())
    return history
