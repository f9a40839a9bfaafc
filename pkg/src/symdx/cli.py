"""Command-line entry point.

Subcommands: convert, pretrain, train, eval, bounds, sweep, serve, interact.
Exit codes: 0 ok, 1 runtime failure, 2 usage/config error. Logs go to
stderr; metrics go to stdout (JSON with --json). Flags override values from
an optional --config JSON file; a full config snapshot lands in every run
directory so a run can be reproduced from it.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .convert import convert_dataset
from .corpus import (
    CorpusError,
    Vocabulary,
    build_cooccurrence,
    load_corpus,
    load_manifest,
)
from .evaluation import (
    EvalError,
    FEATURE_MODES,
    RuleAgentPolicy,
    bounds_report,
    evaluate,
    sweep,
    write_sweep_csv,
)
from .model import (
    CheckpointError,
    DiagnosisModel,
    ModelConfig,
    ModelError,
    checkpoint_file_hash,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    RewardConfig,
    RunDirectory,
    TrainConfig,
    TrainingError,
    pretrain,
    train_joint,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def log(msg: str) -> None:
    print(msg, file=sys.stderr)


def fail(category: str, message: str, code: int) -> int:
    print(f"{category}: {message}", file=sys.stderr)
    return code


def _env(name: str, default=None):
    return os.environ.get(f"SYMDX_{name}", default)


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(path)
    return json.loads(p.read_text("utf-8"))


def build_train_config(cfg: dict, args) -> TrainConfig:
    merged = dict(cfg.get("train", {}))
    for key in (
        "t_max_train", "t_max_infer", "epsilon", "pretrain_lr", "rl_lr",
        "batch_size", "pretrain_epochs", "rl_epochs", "patience", "seed",
    ):
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    return TrainConfig(**merged)


def build_model_config(cfg: dict, vocab: Vocabulary, args) -> ModelConfig:
    merged = dict(cfg.get("model", {}))
    for key in ("embed_dim", "ff_dim", "n_decoder_layers", "n_encoder_layers",
                "n_heads", "max_seq_len"):
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    if getattr(args, "one_hot_inputs", False):
        merged["one_hot_inputs"] = True
    merged["n_symptoms"] = vocab.n_symptoms
    merged["n_diseases"] = vocab.n_diseases
    return ModelConfig(**merged)


def _load_splits(manifest_path: str, need_dev: bool, seed: int):
    """Load train (+dev) records; carve dev out of train when absent."""
    manifest = load_manifest(manifest_path)
    vocab = Vocabulary.load(manifest["vocabulary"])
    train = load_corpus(manifest_path, "train")
    if "dev" in manifest:
        dev = load_corpus(manifest_path, "dev")
    elif need_dev:
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(train))
        n_dev = max(1, len(train) // 10)
        dev = [train[i] for i in order[:n_dev]]
        train = [train[i] for i in order[n_dev:]]
        log(f"no dev split in manifest; carved {len(dev)} records from train")
    else:
        dev = []
    return vocab, train, dev


def _write_run_config(run_dir: RunDirectory, vocab, model_cfg, train_cfg, args, extra=None):
    payload = {
        "command": args.command,
        "manifest": str(args.manifest),
        "model": dataclasses.asdict(model_cfg),
        "train": dataclasses.asdict(train_cfg),
        "reward": dataclasses.asdict(RewardConfig()),
        "vocab_hash": vocab.content_hash(),
        "version": __version__,
    }
    if extra:
        payload.update(extra)
    run_dir.write_config(payload)


# -- commands -------------------------------------------------------------------


def cmd_convert(args) -> int:
    inputs = []
    for spec_item in args.input:
        if "=" in spec_item:
            split, _, path = spec_item.partition("=")
        else:
            split, path = "*", spec_item
        inputs.append((split, Path(path)))
    counts = convert_dataset(inputs, Path(args.out))
    log(f"converted splits: {counts}")
    print(json.dumps(counts))
    return EXIT_OK


def cmd_pretrain(args) -> int:
    cfg = load_config_file(args.config)
    train_cfg = build_train_config(cfg, args)
    vocab, train, dev = _load_splits(args.manifest, True, train_cfg.seed)
    model_cfg = build_model_config(cfg, vocab, args)
    model = DiagnosisModel(model_cfg, seed=train_cfg.seed)
    run_dir = RunDirectory(args.out)
    _write_run_config(run_dir, vocab, model_cfg, train_cfg, args)
    pretrain(model, train, dev, train_cfg, run_dir=run_dir, log=log)
    ckpt = run_dir.checkpoint_path("pretrained.ckpt")
    save_checkpoint(model, vocab.content_hash(), ckpt)
    log(f"saved {ckpt}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config_file(args.config)
    train_cfg = build_train_config(cfg, args)
    vocab, train, dev = _load_splits(args.manifest, True, train_cfg.seed)
    model, _ = load_checkpoint(args.init, expected_vocab_hash=vocab.content_hash())
    reward_cfg = RewardConfig(**cfg.get("reward", {}))
    cooc = build_cooccurrence(train, vocab)
    run_dir = RunDirectory(args.out)
    _write_run_config(run_dir, vocab, model.config, train_cfg, args,
                      extra={"init": str(args.init)})
    train_joint(
        model, train, dev, cooc, train_cfg, reward_cfg,
        run_dir=run_dir, log=log, vocab_hash=vocab.content_hash(),
    )
    log(f"saved {run_dir.checkpoint_path()}")
    return EXIT_OK


def _load_eval_inputs(args):
    manifest = load_manifest(args.manifest)
    vocab = Vocabulary.load(manifest["vocabulary"])
    records = load_corpus(args.manifest, args.split)
    model, _ = load_checkpoint(args.checkpoint, expected_vocab_hash=vocab.content_hash())
    return vocab, records, model


def cmd_eval(args) -> int:
    vocab, records, model = _load_eval_inputs(args)
    policy = None
    if args.policy == "rule":
        train = load_corpus(args.manifest, "train")
        policy = RuleAgentPolicy(build_cooccurrence(train, vocab))
    report = evaluate(
        model, records, t_max=args.max_turns, epsilon=args.epsilon,
        policy=policy, vocab=vocab, threads=args.threads,
    )
    if args.json:
        print(report.to_json())
    else:
        print(
            f"sx_recall {report.sx_recall:.4f}  dx_accuracy {report.dx_accuracy:.4f}  "
            f"mean_turns {report.mean_turns:.2f}  ({report.n_records} records)"
        )
    return EXIT_OK


def cmd_bounds(args) -> int:
    manifest = load_manifest(args.manifest)
    vocab = Vocabulary.load(manifest["vocabulary"])
    train = load_corpus(args.manifest, "train")
    test = load_corpus(args.manifest, "test")
    modes = FEATURE_MODES if args.mode == "all" else (args.mode,)
    report = bounds_report(train, test, vocab.n_symptoms, modes)
    if args.json:
        print(report.to_json())
    else:
        for mode, entry in report.entries.items():
            print(f"{mode}: {entry.test_accuracy:.4f} (C={entry.best_penalty})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    vocab, records, model = _load_eval_inputs(args)
    values = [float(v) for v in args.grid.split(",") if v]
    rows = sweep(
        model, records, axis=args.axis, values=values,
        t_max=args.max_turns, epsilon=args.epsilon, vocab=vocab,
        threads=args.threads,
    )
    write_sweep_csv(rows, args.out)
    log(f"wrote {args.out}")
    if args.json:
        print(json.dumps(
            [{"axis_value": v, **r.to_dict()} for v, r in rows], indent=2
        ))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    vocab = Vocabulary.load(args.vocab)
    model, _ = load_checkpoint(args.checkpoint, expected_vocab_hash=vocab.content_hash())
    app = create_app(
        model, vocab,
        epsilon=args.epsilon, max_turns=args.max_turns,
        session_ttl=args.session_ttl, session_cap=args.session_cap,
        cors_origin=args.cors_origin,
        checkpoint_hash=checkpoint_file_hash(args.checkpoint),
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def cmd_interact(args) -> int:
    from .consult import ConsultationDriver, ConsultError

    vocab = Vocabulary.load(args.vocab)
    model, _ = load_checkpoint(args.checkpoint, expected_vocab_hash=vocab.content_hash())
    driver = ConsultationDriver(model, vocab, epsilon=args.epsilon, max_turns=args.max_turns)
    print("explicit symptoms as name=POS or name=NEG, comma separated:")
    line = input("> ").strip()
    explicit = []
    for part in line.split(","):
        name, _, attr = part.strip().rpartition("=")
        explicit.append([name.strip(), attr.strip().upper() or "POS"])
    try:
        session = driver.start(explicit)
    except ConsultError as e:
        return fail("bad-input", str(e), EXIT_USAGE)
    answers = {"y": "POS", "n": "NEG", "u": "UNK"}
    while not session.stopped:
        print(f"turn {session.turn + 1}: do you have "
              f"'{driver.query_name(session)}'? [y/n/u]")
        reply = input("> ").strip().lower()
        if reply not in answers:
            print("please answer y (yes), n (no) or u (don't know)")
            continue
        driver.answer(session, answers[reply])
    payload = driver.diagnosis_payload(session)
    print(json.dumps(payload, ensure_ascii=False, indent=2))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_eval_flags(p, default_eps=0.99):
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=["train", "dev", "test"])
    p.add_argument("--max-turns", dest="max_turns", type=int, default=10)
    p.add_argument("--epsilon", type=float, default=default_eps)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--json", action="store_true")


def _add_train_flags(p):
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int)
    for key in ("t-max-train", "t-max-infer", "batch-size",
                "pretrain-epochs", "rl-epochs", "patience"):
        p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=int)
    for key in ("epsilon", "pretrain-lr", "rl-lr"):
        p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=float)
    for key in ("embed-dim", "ff-dim", "n-decoder-layers", "n-encoder-layers",
                "n-heads", "max-seq-len"):
        p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=int)
    p.add_argument("--one-hot-inputs", action="store_true",
                   help="fixed one-hot symptom/attribute inputs behind a learned projection")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symdx",
        description="symptom-inquiry and disease-diagnosis agent",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a raw dataset release to canonical JSON")
    p.add_argument("input", nargs="+",
                   help="raw files, optionally prefixed split= (e.g. train=goals.pk)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("pretrain", help="maximum-likelihood pretraining")
    _add_train_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="joint policy-gradient + cross-entropy training")
    _add_train_flags(p)
    p.add_argument("--init", required=True, help="pretrained checkpoint to start from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    _add_eval_flags(p)
    p.add_argument("--policy", default="model", choices=["model", "rule"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bounds", help="reference-classifier accuracy bounds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", default="all", choices=list(FEATURE_MODES) + ["all"])
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="grid sweep over t_max or epsilon")
    _add_eval_flags(p)
    p.add_argument("--axis", required=True, choices=["t_max", "epsilon"])
    p.add_argument("--grid", required=True, help="comma-separated grid values")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="HTTP consultation service")
    p.add_argument("--checkpoint", default=_env("CHECKPOINT"), required=_env("CHECKPOINT") is None)
    p.add_argument("--vocab", default=_env("VOCAB"), required=_env("VOCAB") is None)
    p.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(_env("PORT", "8000")))
    p.add_argument("--epsilon", type=float, default=float(_env("EPSILON", "0.99")))
    p.add_argument("--max-turns", dest="max_turns", type=int,
                   default=int(_env("MAX_TURNS", "10")))
    p.add_argument("--session-ttl", dest="session_ttl", type=float,
                   default=float(_env("SESSION_TTL", "1800")))
    p.add_argument("--session-cap", dest="session_cap", type=int,
                   default=int(_env("SESSION_CAP", "256")))
    p.add_argument("--cors-origin", dest="cors_origin", default=_env("CORS_ORIGIN"))
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("interact", help="terminal consultation against a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--epsilon", type=float, default=0.99)
    p.add_argument("--max-turns", dest="max_turns", type=int, default=10)
    p.set_defaults(func=cmd_interact)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        return fail("config-not-found", str(e), EXIT_USAGE)
    except (CorpusError, ModelError, ValueError) as e:
        return fail("bad-input", str(e), EXIT_USAGE)
    except CheckpointError as e:
        return fail("checkpoint-error", str(e), EXIT_RUNTIME)
    except (TrainingError, EvalError) as e:
        return fail("runtime-error", str(e), EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
