import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_force_cooccurrence, random_records
from symdx.corpus import (
    Attribute,
    CorpusError,
    Vocabulary,
    build_cooccurrence,
    build_vocabulary,
    load_corpus,
    load_manifest,
    read_raw_records,
    resolve_records,
    save_corpus,
)

URI_RECORD = {
    "id": "r1",
    "disease": "URI",
    "explicit": [["cough", "POS"]],
    "implicit": [["fever", "POS"], ["runny nose", "NEG"]],
}

OTHER_RECORD = {
    "id": "r2",
    "disease": "flu",
    "explicit": [["fever", "POS"]],
    "implicit": [["nausea", "POS"]],
}


def write_dataset(tmp_path, records, name="data.json"):
    p = tmp_path / name
    p.write_text(json.dumps(records, ensure_ascii=False), "utf-8")
    return p


class TestAttribute:
    def test_exactly_three_values(self):
        assert {a.value for a in Attribute} == {"POS", "NEG", "UNK"}

    def test_unk_rejected_on_disk(self, tmp_path):
        bad = dict(URI_RECORD, implicit=[["fever", "UNK"]])
        path = write_dataset(tmp_path, [bad])
        with pytest.raises(CorpusError, match="POS or NEG"):
            read_raw_records(path)


class TestLoading:
    def test_direct_field_mapping(self):
        vocab = build_vocabulary([URI_RECORD])
        rec = resolve_records([URI_RECORD], vocab)[0]
        assert len(rec.explicit) == 1  # k
        assert len(rec.explicit) + len(rec.implicit) == 3  # n
        assert rec.explicit[0] == (vocab.symptom_id("cough"), Attribute.POS)
        assert rec.implicit[1] == (vocab.symptom_id("runny nose"), Attribute.NEG)
        assert rec.disease == vocab.disease_id("URI")

    def test_duplicate_symptom_across_parts_rejected(self, tmp_path):
        bad = dict(URI_RECORD, implicit=[["cough", "NEG"]])
        path = write_dataset(tmp_path, [bad])
        with pytest.raises(CorpusError, match="duplicated"):
            read_raw_records(path)

    def test_empty_explicit_rejected(self, tmp_path):
        bad = dict(URI_RECORD, explicit=[])
        path = write_dataset(tmp_path, [bad])
        with pytest.raises(CorpusError, match="empty explicit"):
            read_raw_records(path)

    def test_unknown_name_never_extends_vocabulary(self):
        vocab = build_vocabulary([URI_RECORD])
        with pytest.raises(CorpusError, match="unknown symptom"):
            resolve_records([OTHER_RECORD], vocab)
        assert not vocab.has_symptom("nausea")

    def test_parse_failure(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json", "utf-8")
        with pytest.raises(CorpusError, match="invalid JSON"):
            read_raw_records(p)

    def test_manifest_roundtrip(self, tmp_path):
        vocab = build_vocabulary([URI_RECORD])
        records = resolve_records([URI_RECORD], vocab)
        save_corpus(records, vocab, tmp_path / "train.json")
        vocab.save(tmp_path / "vocab.json")
        (tmp_path / "manifest.json").write_text(
            json.dumps({"vocabulary": "vocab.json", "train": "train.json"})
        )
        loaded = load_corpus(tmp_path / "manifest.json", "train")
        assert loaded == records

    def test_manifest_expected_counts_checked(self, tmp_path):
        vocab = build_vocabulary([URI_RECORD])
        save_corpus(resolve_records([URI_RECORD], vocab), vocab, tmp_path / "t.json")
        vocab.save(tmp_path / "vocab.json")
        (tmp_path / "manifest.json").write_text(
            json.dumps(
                {"vocabulary": "vocab.json", "train": "t.json",
                 "expected": {"n_symptoms": 41, "n_diseases": 5}}
            )
        )
        with pytest.raises(CorpusError, match="expects"):
            load_corpus(tmp_path / "manifest.json", "train")

    def test_unknown_split_rejected(self, tmp_path):
        with pytest.raises(CorpusError, match="unknown split"):
            load_corpus(tmp_path / "manifest.json", "validation")


class TestRoundTrip:
    def test_save_load_save_byte_identical(self, tmp_path):
        vocab = build_vocabulary([URI_RECORD, OTHER_RECORD])
        records = resolve_records([URI_RECORD, OTHER_RECORD], vocab)
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_corpus(records, vocab, first)
        reloaded = resolve_records(read_raw_records(first), vocab)
        save_corpus(reloaded, vocab, second)
        assert first.read_bytes() == second.read_bytes()


class TestVocabulary:
    def test_union_and_lexicographic_ids(self):
        vocab = build_vocabulary([URI_RECORD, OTHER_RECORD])
        assert vocab.symptoms == ["cough", "fever", "nausea", "runny nose"]
        assert vocab.symptom_id("cough") == 1  # PAD occupies 0

    def test_deterministic_across_loads(self):
        a = build_vocabulary([OTHER_RECORD, URI_RECORD])
        b = build_vocabulary([URI_RECORD, OTHER_RECORD])
        assert a == b and a.content_hash() == b.content_hash()

    def test_empty_corpus(self):
        with pytest.raises(CorpusError, match="empty"):
            build_vocabulary([])

    def test_save_load(self, tmp_path):
        vocab = build_vocabulary([URI_RECORD])
        vocab.save(tmp_path / "v.json")
        assert Vocabulary.load(tmp_path / "v.json") == vocab

    @given(st.sets(st.text(min_size=1, max_size=8), min_size=1, max_size=20))
    def test_bijection(self, names):
        ordered = sorted(names)
        vocab = Vocabulary(ordered, ["d0", "d1"])
        for name in ordered:
            assert vocab.symptom_name(vocab.symptom_id(name)) == name

    def test_out_of_range_ids(self):
        vocab = build_vocabulary([URI_RECORD])
        with pytest.raises(CorpusError):
            vocab.symptom_name(0)
        with pytest.raises(CorpusError):
            vocab.symptom_name(vocab.n_symptoms + 1)


class TestCoOccurrence:
    def test_single_record_counts(self):
        raw = [{"id": "1", "disease": "URI",
                "explicit": [["cough", "POS"]], "implicit": [["fever", "POS"]]}]
        vocab = build_vocabulary(raw)
        cooc = build_cooccurrence(resolve_records(raw, vocab), vocab)
        uri = vocab.disease_id("URI")
        cough, fever = vocab.symptom_id("cough"), vocab.symptom_id("fever")
        assert cooc.disease_symptom[uri, cough] == 1
        assert cooc.disease_symptom[uri, fever] == 1
        assert cooc.symptom_symptom[cough, fever] == 1
        assert cooc.symptom_symptom[fever, cough] == 1
        assert cooc.symptom_marginal[cough] == 1

    def test_empty_records(self):
        vocab = build_vocabulary([URI_RECORD])
        cooc = build_cooccurrence([], vocab)
        assert not cooc.disease_symptom.any()
        assert not cooc.symptom_symptom.any()
        assert not cooc.symptom_marginal.any()

    def test_neg_mentions_still_count(self):
        vocab = build_vocabulary([URI_RECORD])
        cooc = build_cooccurrence(resolve_records([URI_RECORD], vocab), vocab)
        runny = vocab.symptom_id("runny nose")  # NEG in the record
        assert cooc.symptom_marginal[runny] == 1

    def test_three_records_vs_brute_force(self):
        raw = [
            {"id": "1", "disease": "A", "explicit": [["x", "POS"]],
             "implicit": [["y", "POS"], ["z", "NEG"]]},
            {"id": "2", "disease": "B", "explicit": [["y", "NEG"]],
             "implicit": [["z", "POS"]]},
            {"id": "3", "disease": "A", "explicit": [["x", "POS"], ["z", "POS"]],
             "implicit": []},
        ]
        vocab = build_vocabulary(raw)
        records = resolve_records(raw, vocab)
        cooc = build_cooccurrence(records, vocab)
        ds, ss, marginal = brute_force_cooccurrence(records, vocab)
        np.testing.assert_array_equal(cooc.disease_symptom, ds)
        np.testing.assert_array_equal(cooc.symptom_symptom, ss)
        np.testing.assert_array_equal(cooc.symptom_marginal, marginal)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 50))
    def test_random_corpora_match_naive_oracle(self, seed, n_records):
        rng = np.random.default_rng(seed)
        raw = random_records(rng, n_records, n_symptoms=12, n_diseases=3)
        vocab = build_vocabulary(raw)
        records = resolve_records(raw, vocab)
        cooc = build_cooccurrence(records, vocab)
        ds, ss, marginal = brute_force_cooccurrence(records, vocab)
        np.testing.assert_array_equal(cooc.disease_symptom, ds)
        np.testing.assert_array_equal(cooc.symptom_symptom, ss)
        np.testing.assert_array_equal(cooc.symptom_marginal, marginal)

    def test_symmetry_and_row_sums(self, synth_bundle):
        cooc = synth_bundle["cooc"]
        np.testing.assert_array_equal(cooc.symptom_symptom, cooc.symptom_symptom.T)
        for d in range(synth_bundle["vocab"].n_diseases):
            mentions = sum(
                len(r.all_pairs) for r in synth_bundle["train"] if r.disease == d
            )
            assert cooc.disease_symptom[d].sum() == mentions


class TestPublicDatasets:
    """Dataset-level statistics of the converted public corpora; skipped
    when the datasets are not present."""

    def test_dxy_counts(self, dxy_manifest):
        if dxy_manifest is None:
            pytest.skip("Dxy dataset not converted under data/dxy")
        from symdx.corpus import Vocabulary

        vocab = Vocabulary.load(load_manifest(dxy_manifest)["vocabulary"])
        total = len(load_corpus(dxy_manifest, "train")) + len(
            load_corpus(dxy_manifest, "test")
        )
        assert total == 527
        assert vocab.n_diseases == 5
        assert vocab.n_symptoms == 41

    def test_mz4_counts(self, mz4_manifest):
        if mz4_manifest is None:
            pytest.skip("MZ-4 dataset not converted under data/mz4")
        from symdx.corpus import Vocabulary

        vocab = Vocabulary.load(load_manifest(mz4_manifest)["vocabulary"])
        total = sum(
            len(load_corpus(mz4_manifest, s))
            for s in ("train", "dev", "test")
            if s in load_manifest(mz4_manifest)
        )
        assert total == 1733
        assert vocab.n_diseases == 4
        assert vocab.n_symptoms == 230
