"""Decoder-encoder pair: symptom-inquiry generator and disease classifier.

The causal decoder reads the symptom/attribute context with sinusoidal
position encodings and emits next-symptom logits. The bidirectional encoder
reads the collected symptom/attribute pairs with no position information,
mean-pools and classifies the disease, which makes it invariant to input
order. Both stacks share the symptom and attribute embedding tables.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import nn
from .corpus import ATTRIBUTE_IDS, N_ATTRIBUTES, PAD_ID, Attribute
from .env import DialogueState
from .nn import Tensor
from .nn.layers import ParamStore, LayerNorm, Linear, TransformerBlock, sinusoidal_positions

CHECKPOINT_MAGIC = b"SYMDXNET"
CHECKPOINT_VERSION = 1

Pairs = Sequence[tuple[int, Attribute]]


class ModelError(ValueError):
    pass


class CheckpointError(RuntimeError):
    """Unreadable, truncated or mismatched checkpoint file."""


@dataclass(frozen=True)
class ModelConfig:
    n_symptoms: int
    n_diseases: int
    n_decoder_layers: int = 4
    n_encoder_layers: int = 1
    embed_dim: int = 128
    ff_dim: int = 256
    n_heads: int = 8
    max_seq_len: int = 64
    one_hot_inputs: bool = False

    def __post_init__(self):
        if self.n_encoder_layers >= self.n_decoder_layers:
            raise ModelError(
                f"encoder must be shallower than the decoder "
                f"({self.n_encoder_layers} >= {self.n_decoder_layers})"
            )
        if self.embed_dim % self.n_heads != 0:
            raise ModelError(
                f"embed_dim {self.embed_dim} not divisible by {self.n_heads} heads"
            )
        if self.n_symptoms < 1 or self.n_diseases < 2:
            raise ModelError("need at least 1 symptom and 2 diseases")
        if self.max_seq_len < 2:
            raise ModelError("max_seq_len too small")

    @property
    def n_symptom_slots(self) -> int:
        return self.n_symptoms + 1  # PAD occupies slot 0


class DiagnosisModel:
    """Holds all parameters and runs both forward paths."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        store = ParamStore(np.random.default_rng(seed))
        self.store = store
        c = config

        if c.one_hot_inputs:
            # fixed one-hot symptom/attribute vectors, concatenated and sent
            # through one learned linear projection; computed as row lookups
            self.input_proj_w = store.normal(
                "embed.onehot_proj.w", (c.n_symptom_slots + N_ATTRIBUTES, c.embed_dim)
            )
            self.input_proj_b = store.zeros("embed.onehot_proj.b", (c.embed_dim,))
            self.symptom_table = None
            self.attribute_table = None
        else:
            self.symptom_table = store.normal(
                "embed.symptom", (c.n_symptom_slots, c.embed_dim)
            )
            self.attribute_table = store.normal(
                "embed.attribute", (N_ATTRIBUTES, c.embed_dim)
            )
            self.input_proj_w = None
            self.input_proj_b = None

        self.decoder_blocks = [
            TransformerBlock(store, f"decoder.{i}", c.embed_dim, c.n_heads, c.ff_dim)
            for i in range(c.n_decoder_layers)
        ]
        self.decoder_norm = LayerNorm(store, "decoder.final_norm", c.embed_dim)
        self.symptom_head = Linear(store, "decoder.symptom_head", c.embed_dim, c.n_symptom_slots)

        self.encoder_blocks = [
            TransformerBlock(store, f"encoder.{i}", c.embed_dim, c.n_heads, c.ff_dim)
            for i in range(c.n_encoder_layers)
        ]
        self.encoder_norm = LayerNorm(store, "encoder.final_norm", c.embed_dim)
        self.disease_head = Linear(store, "encoder.disease_head", c.embed_dim, c.n_diseases)

        self.positions = sinusoidal_positions(c.max_seq_len, c.embed_dim)

    # -- parameters --------------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return self.store.tensors()

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return self.store.items()

    def zero_grad(self) -> None:
        self.store.zero_grad()

    def params_hash(self) -> str:
        """Content hash of the config and every parameter block."""
        h = hashlib.sha256(json.dumps(asdict(self.config), sort_keys=True).encode())
        for name, p in self.named_parameters():
            h.update(name.encode())
            h.update(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
        return h.hexdigest()

    # -- shared input representation ----------------------------------------

    def _split_pairs(self, pairs: Pairs) -> tuple[np.ndarray, np.ndarray]:
        sids = np.array([s for s, _ in pairs], dtype=np.intp)
        aids = np.array([ATTRIBUTE_IDS[a] for _, a in pairs], dtype=np.intp)
        if sids.size and (sids.min() < 1 or sids.max() >= self.config.n_symptom_slots):
            raise ModelError("symptom id out of range")
        return sids, aids

    def embed_pairs(self, pairs: Pairs) -> Tensor:
        sids, aids = self._split_pairs(pairs)
        if self.config.one_hot_inputs:
            x = nn.add(
                nn.embedding(self.input_proj_w, sids),
                nn.embedding(self.input_proj_w, self.config.n_symptom_slots + aids),
            )
            return nn.add(x, self.input_proj_b)
        return nn.add(
            nn.embedding(self.symptom_table, sids),
            nn.embedding(self.attribute_table, aids),
        )

    # -- decoder -------------------------------------------------------------

    def decoder_all_logits(self, context: Pairs) -> Tensor:
        """Next-symptom logits at every position of the context, (L, slots)."""
        n = len(context)
        if n == 0:
            raise ModelError("decoder context must be non-empty")
        if n > self.config.max_seq_len:
            raise ModelError(
                f"context length {n} exceeds max_seq_len {self.config.max_seq_len}"
            )
        x = nn.add(self.embed_pairs(context), self.positions[:n])
        mask = nn.causal_mask(n)
        for block in self.decoder_blocks:
            x = block(x, mask)
        x = self.decoder_norm(x)
        return self.symptom_head(x)

    def decoder_logits(self, context: Pairs) -> np.ndarray:
        """Logits for the next symptom after the full context (inference)."""
        with nn.no_grad():
            return self.decoder_all_logits(context).data[-1].copy()

    # -- encoder -------------------------------------------------------------

    def classify_logits(self, pairs: Pairs) -> Tensor:
        if len(pairs) == 0:
            raise ModelError("classifier input must be non-empty")
        x = self.embed_pairs(pairs)  # no position information
        for block in self.encoder_blocks:
            x = block(x, None)
        x = self.encoder_norm(x)
        pooled = nn.mean(x, axis=0)
        return self.disease_head(nn.reshape(pooled, (1, -1)))

    def classify(self, pairs: Pairs) -> np.ndarray:
        """Probability vector over diseases (inference)."""
        with nn.no_grad():
            logits = self.classify_logits(pairs)
            return nn.softmax(logits, axis=-1).data[0].copy()

    # -- acting ----------------------------------------------------------------

    def action_mask(self, state: DialogueState) -> np.ndarray:
        """Permitted next queries: everything except PAD, explicit and asked."""
        mask = np.ones(self.config.n_symptom_slots, dtype=bool)
        mask[PAD_ID] = False
        for sid in state.forbidden_ids():
            mask[sid] = False
        return mask

    def next_symptom(
        self,
        context: Pairs,
        mask: np.ndarray,
        mode: str = "greedy",
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[int, float]:
        logits = self.decoder_logits(context)
        return masked_choice(logits, mask, mode, rng)


def masked_log_probs(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Log-probabilities under the masked softmax; -inf at forbidden actions."""
    if not mask.any():
        raise ModelError("fully-masked action space")
    z = np.where(mask, logits, -np.inf)
    m = z.max()
    shifted = z - m
    log_z = np.log(np.exp(shifted[mask]).sum())
    return shifted - log_z


def masked_choice(
    logits: np.ndarray,
    mask: np.ndarray,
    mode: str = "greedy",
    rng: Optional[np.random.Generator] = None,
) -> tuple[int, float]:
    """Pick an action from masked logits.

    Greedy takes the argmax (smallest id on ties); sample draws from the
    masked softmax. Returns (action id, log-probability of that action).
    """
    log_p = masked_log_probs(logits, mask)
    if mode == "greedy":
        choice = int(np.argmax(np.where(mask, logits, -np.inf)))
    elif mode == "sample":
        if rng is None:
            raise ModelError("sample mode requires an rng")
        p = np.exp(log_p)
        p = np.where(mask, p, 0.0)
        p /= p.sum()
        choice = int(rng.choice(len(p), p=p))
    else:
        raise ModelError(f"unknown decoding mode {mode!r}")
    return choice, float(log_p[choice])


# -- checkpoint format --------------------------------------------------------


def save_checkpoint(model: DiagnosisModel, vocab_hash: str, path: str | Path) -> None:
    """Versioned header (magic, version, config JSON, vocab hash, parameter
    manifest) followed by raw little-endian float64 blocks in declared order."""
    names_shapes = [[name, list(p.shape)] for name, p in model.named_parameters()]
    header = json.dumps(
        {
            "config": asdict(model.config),
            "vocab_hash": vocab_hash,
            "params": names_shapes,
        }
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        f.write(header)
        for _, p in model.named_parameters():
            f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(
    path: str | Path, expected_vocab_hash: Optional[str] = None
) -> tuple[DiagnosisModel, str]:
    """Rebuild a model from a checkpoint; refuses a mismatched vocabulary."""
    blob = Path(path).read_bytes()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint")
    version, header_len = struct.unpack("<II", blob[8:16])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e
    vocab_hash = header["vocab_hash"]
    if expected_vocab_hash is not None and vocab_hash != expected_vocab_hash:
        raise CheckpointError(
            f"{path}: checkpoint was trained against a different vocabulary"
        )
    model = DiagnosisModel(ModelConfig(**header["config"]))
    offset = 16 + header_len
    stored = header["params"]
    current = model.named_parameters()
    if [n for n, _ in stored] != [n for n, _ in current]:
        raise CheckpointError(f"{path}: parameter manifest mismatch")
    for (name, shape), (_, p) in zip(stored, current):
        if tuple(shape) != p.shape:
            raise CheckpointError(f"{path}: shape mismatch for {name}")
        nbytes = int(np.prod(shape)) * 8 if shape else 8
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated parameter block {name}")
        p.data = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after parameter blocks")
    return model, vocab_hash


def checkpoint_file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
