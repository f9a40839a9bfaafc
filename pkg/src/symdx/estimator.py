"""Estimator-style facade over the full train/diagnose pipeline.

DialogueDiagnoser follows the scikit-learn convention (constructor keyword
hyperparameters, fit/predict/score, get_params/set_params) so the agent can
sit inside existing tooling. Records are the name-based dicts of the
canonical JSON format; fit builds the vocabulary, pretrains and then runs
joint optimization, and predict plays a greedy consultation per record
against its simulated patient.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import build_cooccurrence, build_vocabulary
from .evaluation import EvalReport, evaluate
from .model import DiagnosisModel, ModelConfig
from .training import TrainConfig, pretrain, rollout, train_joint
from .validation import as_structured, check_is_fitted, check_raw_records


class DialogueDiagnoser(BaseEstimator):
    def __init__(
        self,
        embed_dim: int = 64,
        ff_dim: int = 128,
        n_decoder_layers: int = 2,
        n_encoder_layers: int = 1,
        n_heads: int = 4,
        max_seq_len: int = 64,
        one_hot_inputs: bool = False,
        t_max_train: int = 10,
        t_max_infer: int = 10,
        epsilon: float = 0.99,
        pretrain_lr: float = 3e-4,
        rl_lr: float = 1e-4,
        batch_size: int = 16,
        pretrain_epochs: int = 20,
        rl_epochs: int = 10,
        patience: int = 5,
        dev_fraction: float = 0.1,
        seed: int = 0,
        verbose: bool = False,
    ):
        self.embed_dim = embed_dim
        self.ff_dim = ff_dim
        self.n_decoder_layers = n_decoder_layers
        self.n_encoder_layers = n_encoder_layers
        self.n_heads = n_heads
        self.max_seq_len = max_seq_len
        self.one_hot_inputs = one_hot_inputs
        self.t_max_train = t_max_train
        self.t_max_infer = t_max_infer
        self.epsilon = epsilon
        self.pretrain_lr = pretrain_lr
        self.rl_lr = rl_lr
        self.batch_size = batch_size
        self.pretrain_epochs = pretrain_epochs
        self.rl_epochs = rl_epochs
        self.patience = patience
        self.dev_fraction = dev_fraction
        self.seed = seed
        self.verbose = verbose

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            t_max_train=self.t_max_train,
            t_max_infer=self.t_max_infer,
            epsilon=self.epsilon,
            pretrain_lr=self.pretrain_lr,
            rl_lr=self.rl_lr,
            batch_size=self.batch_size,
            pretrain_epochs=self.pretrain_epochs,
            rl_epochs=self.rl_epochs,
            patience=self.patience,
            seed=self.seed,
        )

    def fit(self, records: Sequence[dict], dev_records: Optional[Sequence[dict]] = None):
        """Build the vocabulary from `records`, pretrain and jointly train."""
        raw = check_raw_records(records)
        self.vocab_ = build_vocabulary(raw)
        train = as_structured(raw, self.vocab_)
        if dev_records is not None:
            dev = as_structured(list(dev_records), self.vocab_)
        else:
            rng = np.random.default_rng(self.seed)
            order = rng.permutation(len(train))
            n_dev = max(1, int(len(train) * self.dev_fraction))
            dev = [train[i] for i in order[:n_dev]]
            train = [train[i] for i in order[n_dev:]]
        self.cooc_ = build_cooccurrence(train, self.vocab_)
        config = ModelConfig(
            n_symptoms=self.vocab_.n_symptoms,
            n_diseases=self.vocab_.n_diseases,
            n_decoder_layers=self.n_decoder_layers,
            n_encoder_layers=self.n_encoder_layers,
            embed_dim=self.embed_dim,
            ff_dim=self.ff_dim,
            n_heads=self.n_heads,
            max_seq_len=self.max_seq_len,
            one_hot_inputs=self.one_hot_inputs,
        )
        self.model_ = DiagnosisModel(config, seed=self.seed)
        cfg = self._train_config()
        log = print if self.verbose else (lambda s: None)
        pretrain(self.model_, train, dev, cfg, log=log)
        train_joint(self.model_, train, dev, self.cooc_, cfg, log=log)
        return self

    def _rollouts(self, records):
        check_is_fitted(self)
        structured = as_structured(records, self.vocab_)
        return structured, [
            rollout(
                self.model_, rec, mode="greedy",
                t_max=self.t_max_infer, epsilon=self.epsilon,
            )
            for rec in structured
        ]

    def predict(self, records: Sequence[dict]) -> list[str]:
        """Greedy consultation per record; returns predicted disease names."""
        _, trajectories = self._rollouts(records)
        return [self.vocab_.disease_name(t.predicted) for t in trajectories]

    def predict_proba(self, records: Sequence[dict]) -> np.ndarray:
        _, trajectories = self._rollouts(records)
        return np.array([t.state.probabilities for t in trajectories])

    def score(self, records: Sequence[dict], y=None) -> float:
        """Diagnostic accuracy against each record's own disease label."""
        structured, trajectories = self._rollouts(records)
        hits = [t.predicted == r.disease for t, r in zip(trajectories, structured)]
        return float(np.mean(hits))

    def evaluate(self, records: Sequence[dict]) -> EvalReport:
        check_is_fitted(self)
        structured = as_structured(records, self.vocab_)
        return evaluate(
            self.model_, structured, t_max=self.t_max_infer,
            epsilon=self.epsilon, vocab=self.vocab_,
        )
