"""Shared test utilities: independent reference implementations (oracles),
synthetic corpus generators and policy test hooks.

The reference forwards transcribe the model equations literally -- explicit
loops over layers, heads and positions, reading weights straight out of the
parameter store -- so they share no code with the graph-based forward path.
"""

from __future__ import annotations

import math

import numpy as np

from symdx.corpus import (
    ATTRIBUTE_IDS,
    StructuredMCR,
    build_cooccurrence,
    build_vocabulary,
    resolve_records,
)
from symdx.model import DiagnosisModel
from symdx.training import StopInquiry


# -- literal-transcription forward oracles ---------------------------------


def ref_layer_norm(x, gain, bias, eps=1e-12):
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        row = x[i]
        mu = row.mean()
        var = ((row - mu) ** 2).mean()
        out[i] = (row - mu) / math.sqrt(var + eps) * gain + bias
    return out


def ref_gelu(x):
    out = np.zeros_like(x)
    flat_in, flat_out = x.ravel(), out.ravel()
    for i, v in enumerate(flat_in):
        flat_out[i] = 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0)))
    return out


def ref_softmax_vec(scores):
    scores = np.asarray(scores, dtype=np.float64)
    e = np.exp(scores - scores.max())
    return e / e.sum()


def ref_attention(q, k, v, n_heads, causal, w_out, b_out):
    """Per-head, per-position scaled dot-product attention, no batching."""
    length, dim = q.shape
    head_dim = dim // n_heads
    kv_len = k.shape[0]
    merged = np.zeros((length, dim))
    for h in range(n_heads):
        sl = slice(h * head_dim, (h + 1) * head_dim)
        qs, ks, vs = q[:, sl], k[:, sl], v[:, sl]
        for i in range(length):
            allowed = range(min(i + 1, kv_len)) if causal else range(kv_len)
            scores = [qs[i] @ ks[j] / math.sqrt(head_dim) for j in allowed]
            weights = ref_softmax_vec(scores)
            merged[i, sl] = sum(w * vs[j] for w, j in zip(weights, allowed))
    out = merged @ w_out
    if b_out is not None:
        out = out + b_out
    return out


def _ref_block(model, prefix, x, causal):
    p = model.store
    dim = model.config.embed_dim
    h = ref_layer_norm(x, p[f"{prefix}.ln1.gain"].data, p[f"{prefix}.ln1.bias"].data)
    q = h @ p[f"{prefix}.attn.q.w"].data + p[f"{prefix}.attn.q.b"].data
    k = h @ p[f"{prefix}.attn.k.w"].data + p[f"{prefix}.attn.k.b"].data
    v = h @ p[f"{prefix}.attn.v.w"].data + p[f"{prefix}.attn.v.b"].data
    x = x + ref_attention(
        q, k, v, model.config.n_heads, causal,
        p[f"{prefix}.attn.out.w"].data, p[f"{prefix}.attn.out.b"].data,
    )
    h = ref_layer_norm(x, p[f"{prefix}.ln2.gain"].data, p[f"{prefix}.ln2.bias"].data)
    inner = ref_gelu(h @ p[f"{prefix}.ff.inner.w"].data + p[f"{prefix}.ff.inner.b"].data)
    return x + (inner @ p[f"{prefix}.ff.outer.w"].data + p[f"{prefix}.ff.outer.b"].data)


def ref_embed(model, pairs):
    p = model.store
    rows = []
    for sid, attr in pairs:
        aid = ATTRIBUTE_IDS[attr]
        if model.config.one_hot_inputs:
            w = p["embed.onehot_proj.w"].data
            rows.append(
                w[sid] + w[model.config.n_symptom_slots + aid]
                + p["embed.onehot_proj.b"].data
            )
        else:
            rows.append(p["embed.symptom"].data[sid] + p["embed.attribute"].data[aid])
    return np.stack(rows)


def ref_positions(length, dim):
    table = np.zeros((length, dim))
    for pos in range(length):
        for j in range(dim // 2):
            angle = pos / (10000.0 ** (2.0 * j / dim))
            table[pos, 2 * j] = math.sin(angle)
            table[pos, 2 * j + 1] = math.cos(angle)
    return table


def ref_decoder_all_logits(model: DiagnosisModel, context) -> np.ndarray:
    p = model.store
    x = ref_embed(model, context) + ref_positions(len(context), model.config.embed_dim)
    for i in range(model.config.n_decoder_layers):
        x = _ref_block(model, f"decoder.{i}", x, causal=True)
    x = ref_layer_norm(
        x, p["decoder.final_norm.gain"].data, p["decoder.final_norm.bias"].data
    )
    return x @ p["decoder.symptom_head.w"].data + p["decoder.symptom_head.b"].data


def ref_classify(model: DiagnosisModel, pairs) -> np.ndarray:
    p = model.store
    x = ref_embed(model, pairs)
    for i in range(model.config.n_encoder_layers):
        x = _ref_block(model, f"encoder.{i}", x, causal=False)
    x = ref_layer_norm(
        x, p["encoder.final_norm.gain"].data, p["encoder.final_norm.bias"].data
    )
    pooled = x.mean(axis=0)
    logits = pooled @ p["encoder.disease_head.w"].data + p["encoder.disease_head.b"].data
    return ref_softmax_vec(logits)


# -- synthetic corpora -------------------------------------------------------


def cluster_corpus(n_per_disease=50, n_diseases=4, cluster_size=5, seed=0):
    """Disjoint 5-symptom clusters per disease: one cluster symptom is
    explicit, the rest are implicit in random order."""
    rng = np.random.default_rng(seed)
    records = []
    for d in range(n_diseases):
        cluster = [f"symptom_{cluster_size * d + j:02d}" for j in range(cluster_size)]
        for i in range(n_per_disease):
            idx = rng.permutation(cluster_size)
            records.append(
                {
                    "id": f"d{d}r{i}",
                    "disease": f"disease_{d}",
                    "explicit": [[cluster[idx[0]], "POS"]],
                    "implicit": [[cluster[j], "POS"] for j in idx[1:]],
                }
            )
    rng.shuffle(records)
    return records


def ambiguous_corpus(n_per_disease=40, n_diseases=4, cluster_size=3, seed=1):
    """Every record starts from the same generic explicit symptom, so only
    implicit symptoms identify the disease (explicit-only features are at
    chance level)."""
    rng = np.random.default_rng(seed)
    records = []
    for d in range(n_diseases):
        cluster = [f"marker_{cluster_size * d + j:02d}" for j in range(cluster_size)]
        for i in range(n_per_disease):
            idx = rng.permutation(cluster_size)
            records.append(
                {
                    "id": f"a{d}r{i}",
                    "disease": f"disease_{d}",
                    "explicit": [["common_complaint", "POS"]],
                    "implicit": [[cluster[j], "POS"] for j in idx],
                }
            )
    rng.shuffle(records)
    return records


def build_bundle(raw, split=(0.7, 0.15)):
    """Resolve a raw corpus and cut train/dev/test plus co-occurrence."""
    vocab = build_vocabulary(raw)
    records = resolve_records(raw, vocab)
    n = len(records)
    n_train = int(n * split[0])
    n_dev = int(n * split[1])
    train = records[:n_train]
    dev = records[n_train : n_train + n_dev]
    test = records[n_train + n_dev :]
    return {
        "raw": raw,
        "vocab": vocab,
        "records": records,
        "train": train,
        "dev": dev,
        "test": test,
        "cooc": build_cooccurrence(train, vocab),
    }


def random_records(rng, n_records, n_symptoms, n_diseases, max_explicit=3, max_implicit=5):
    """Uncorrelated random records for structural/metric tests."""
    symptoms = [f"s{i:03d}" for i in range(n_symptoms)]
    raw = []
    for i in range(n_records):
        n_exp = int(rng.integers(1, max_explicit + 1))
        n_imp = int(rng.integers(0, max_implicit + 1))
        chosen = rng.choice(n_symptoms, size=n_exp + n_imp, replace=False)
        attrs = lambda: ("POS" if rng.random() < 0.7 else "NEG")
        raw.append(
            {
                "id": str(i),
                "disease": f"d{int(rng.integers(n_diseases))}",
                "explicit": [[symptoms[j], attrs()] for j in chosen[:n_exp]],
                "implicit": [[symptoms[j], attrs()] for j in chosen[n_exp:]],
            }
        )
    return raw


# -- policy test hooks ---------------------------------------------------------


class OraclePolicy:
    """Asks exactly the record's implicit symptoms in order, then stops."""

    def __init__(self, record: StructuredMCR):
        self.queue = list(record.implicit_ids)

    def choose(self, state, mask, rng):
        while self.queue:
            sid = self.queue.pop(0)
            if mask[sid]:
                return sid
        raise StopInquiry


class RandomPolicy:
    def __init__(self, rng):
        self.rng = rng

    def choose(self, state, mask, rng):
        options = np.flatnonzero(mask)
        return int(self.rng.choice(options))


class ScriptedPolicy:
    """Asks a fixed list of symptom ids in order."""

    def __init__(self, sids):
        self.queue = list(sids)

    def choose(self, state, mask, rng):
        if not self.queue:
            raise StopInquiry
        return self.queue.pop(0)


def brute_force_cooccurrence(records, vocab):
    """Naive O(records * |S|^2) recount used as the counting oracle."""
    n = vocab.n_symptom_slots
    ds = np.zeros((vocab.n_diseases, n), dtype=np.int64)
    ss = np.zeros((n, n), dtype=np.int64)
    marginal = np.zeros(n, dtype=np.int64)
    for rec in records:
        present = {s for s, _ in rec.all_pairs}
        for s in range(1, n):
            if s in present:
                ds[rec.disease, s] += 1
                marginal[s] += 1
            for t in range(1, n):
                if s != t and s in present and t in present:
                    ss[s, t] += 1
    return ds, ss, marginal
