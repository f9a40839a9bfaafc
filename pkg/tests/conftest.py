import os
from pathlib import Path

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from helpers import ambiguous_corpus, build_bundle, cluster_corpus
from symdx.model import DiagnosisModel, ModelConfig
from symdx.training import RewardConfig, TrainConfig, pretrain, train_joint

TINY_CONFIG = dict(
    n_decoder_layers=2, n_encoder_layers=1, embed_dim=8, ff_dim=16,
    n_heads=2, max_seq_len=16,
)


def tiny_model(n_symptoms=6, n_diseases=3, seed=0, **overrides) -> DiagnosisModel:
    cfg = ModelConfig(
        n_symptoms=n_symptoms, n_diseases=n_diseases, **{**TINY_CONFIG, **overrides}
    )
    return DiagnosisModel(cfg, seed=seed)


@pytest.fixture
def make_tiny_model():
    return tiny_model


@pytest.fixture(scope="session")
def synth_bundle():
    return build_bundle(cluster_corpus())


@pytest.fixture(scope="session")
def trained_synth(synth_bundle):
    """One full pretrain + joint run on the cluster corpus (used by several
    suites; ~40s)."""
    import time

    b = synth_bundle
    model = DiagnosisModel(
        ModelConfig(
            n_symptoms=b["vocab"].n_symptoms, n_diseases=b["vocab"].n_diseases,
            n_decoder_layers=2, n_encoder_layers=1, embed_dim=32, ff_dim=64,
            n_heads=4, max_seq_len=16,
        ),
        seed=0,
    )
    cfg = TrainConfig(
        t_max_train=6, t_max_infer=6, epsilon=1.0, batch_size=8,
        pretrain_epochs=40, rl_epochs=6, patience=8, seed=0,
        pretrain_lr=3e-3, rl_lr=1e-3,
    )
    t0 = time.monotonic()
    pretrain(model, b["train"], b["dev"], cfg)
    history = train_joint(model, b["train"], b["dev"], b["cooc"], cfg, RewardConfig())
    elapsed = time.monotonic() - t0
    return {"model": model, "config": cfg, "history": history,
            "train_seconds": elapsed, **b}


@pytest.fixture(scope="session")
def ambiguous_bundle():
    return build_bundle(ambiguous_corpus())


@pytest.fixture(scope="session")
def trained_ambiguous(ambiguous_bundle):
    """Model trained on the shared-explicit corpus: classifier confidence is
    low until discriminative implicit symptoms are collected."""
    b = ambiguous_bundle
    model = DiagnosisModel(
        ModelConfig(
            n_symptoms=b["vocab"].n_symptoms, n_diseases=b["vocab"].n_diseases,
            n_decoder_layers=2, n_encoder_layers=1, embed_dim=32, ff_dim=64,
            n_heads=4, max_seq_len=16,
        ),
        seed=1,
    )
    cfg = TrainConfig(
        t_max_train=5, t_max_infer=5, epsilon=1.0, batch_size=8,
        pretrain_epochs=30, rl_epochs=4, patience=6, seed=1,
        pretrain_lr=3e-3, rl_lr=1e-3,
    )
    pretrain(model, b["train"], b["dev"], cfg)
    train_joint(model, b["train"], b["dev"], b["cooc"], cfg, RewardConfig())
    return {"model": model, "config": cfg, **b}


def dataset_manifest(name: str) -> Path | None:
    """Locate a converted public dataset (dxy, mz4, mz10) if present."""
    root = Path(os.environ.get("SYMDX_DATA_DIR", Path(__file__).parent.parent / "data"))
    manifest = root / name / "manifest.json"
    return manifest if manifest.exists() else None


@pytest.fixture
def dxy_manifest():
    return dataset_manifest("dxy")


@pytest.fixture
def mz4_manifest():
    return dataset_manifest("mz4")


@pytest.fixture(scope="session")
def trained_dxy():
    """Full paper-scale training on Dxy when the converted dataset exists;
    None otherwise. Shared by the end-to-end and sweep criteria."""
    import time

    from symdx.corpus import Vocabulary, build_cooccurrence, load_corpus, load_manifest

    manifest_path = dataset_manifest("dxy")
    if manifest_path is None:
        return None
    manifest = load_manifest(manifest_path)
    vocab = Vocabulary.load(manifest["vocabulary"])
    train = load_corpus(manifest_path, "train")
    test = load_corpus(manifest_path, "test")
    rng = np.random.default_rng(0)
    order = rng.permutation(len(train))
    n_dev = max(1, len(train) // 10)
    dev = [train[i] for i in order[:n_dev]]
    train = [train[i] for i in order[n_dev:]]
    cooc = build_cooccurrence(train, vocab)
    model = DiagnosisModel(
        ModelConfig(n_symptoms=vocab.n_symptoms, n_diseases=vocab.n_diseases,
                    embed_dim=128, ff_dim=256, n_decoder_layers=4,
                    n_encoder_layers=1, n_heads=8, max_seq_len=64),
        seed=0,
    )
    cfg = TrainConfig(seed=0, batch_size=16, pretrain_epochs=30, rl_epochs=8,
                      patience=5)
    t0 = time.monotonic()
    pretrain(model, train, dev, cfg)
    train_joint(model, train, dev, cooc, cfg, RewardConfig())
    elapsed = time.monotonic() - t0
    return {"model": model, "vocab": vocab, "test": test,
            "train_seconds": elapsed}
