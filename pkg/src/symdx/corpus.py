"""Canonical dataset format, vocabulary and co-occurrence statistics.

A consultation record pairs symptoms with an attribute (POS/NEG), split into
the explicit symptoms known at session start and the implicit symptoms that
must be discovered by querying. Records are stored as UTF-8 JSON arrays; a
split manifest maps split names to dataset files and to the vocabulary file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD_ID = 0

SPLITS = ("train", "dev", "test")


class Attribute(Enum):
    """Relation of a symptom to the patient.

    UNK never appears in a stored record; it exists only as a simulator
    (or human) response to a query about a symptom the record says nothing
    about.
    """

    POS = "POS"
    NEG = "NEG"
    UNK = "UNK"


ATTRIBUTE_IDS = {Attribute.POS: 0, Attribute.NEG: 1, Attribute.UNK: 2}
N_ATTRIBUTES = 3


class CorpusError(ValueError):
    """Malformed dataset file or record violating a corpus invariant."""


@dataclass(frozen=True)
class StructuredMCR:
    """One structured consultation: explicit/implicit symptom-attribute pairs
    plus the disease label. Symptom and disease fields hold vocabulary ids."""

    record_id: str
    explicit: tuple[tuple[int, Attribute], ...]
    implicit: tuple[tuple[int, Attribute], ...]
    disease: int

    @property
    def explicit_ids(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.explicit)

    @property
    def implicit_ids(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.implicit)

    @property
    def all_pairs(self) -> tuple[tuple[int, Attribute], ...]:
        return self.explicit + self.implicit


class Vocabulary:
    """Bijections between symptom/disease names and dense ids.

    Symptom id 0 is the reserved PAD slot: real symptoms occupy ids
    1..n_symptoms, so arrays over the symptom action space have length
    n_symptoms + 1 with index 0 permanently masked. Disease ids are dense
    from 0.
    """

    def __init__(self, symptoms: Sequence[str], diseases: Sequence[str]):
        if len(set(symptoms)) != len(symptoms):
            raise CorpusError("duplicate symptom names")
        if len(set(diseases)) != len(diseases):
            raise CorpusError("duplicate disease names")
        self.symptoms = list(symptoms)
        self.diseases = list(diseases)
        self._sym_ids = {name: i + 1 for i, name in enumerate(self.symptoms)}
        self._dis_ids = {name: i for i, name in enumerate(self.diseases)}

    @property
    def n_symptoms(self) -> int:
        return len(self.symptoms)

    @property
    def n_diseases(self) -> int:
        return len(self.diseases)

    @property
    def n_symptom_slots(self) -> int:
        """Size of the id-indexed symptom space including the PAD slot."""
        return len(self.symptoms) + 1

    def symptom_id(self, name: str) -> int:
        try:
            return self._sym_ids[name]
        except KeyError:
            raise CorpusError(f"unknown symptom name: {name!r}") from None

    def disease_id(self, name: str) -> int:
        try:
            return self._dis_ids[name]
        except KeyError:
            raise CorpusError(f"unknown disease name: {name!r}") from None

    def symptom_name(self, sid: int) -> str:
        if not 1 <= sid <= len(self.symptoms):
            raise CorpusError(f"symptom id out of range: {sid}")
        return self.symptoms[sid - 1]

    def disease_name(self, did: int) -> str:
        if not 0 <= did < len(self.diseases):
            raise CorpusError(f"disease id out of range: {did}")
        return self.diseases[did]

    def has_symptom(self, name: str) -> bool:
        return name in self._sym_ids

    def to_dict(self) -> dict:
        return {"symptoms": list(self.symptoms), "diseases": list(self.diseases)}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(d["symptoms"], d["diseases"])

    def content_hash(self) -> str:
        """Stable hash of the name<->id assignment, stored in checkpoints."""
        payload = json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, indent=1), "utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self.symptoms == other.symptoms
            and self.diseases == other.diseases
        )


@dataclass
class CoOccurrence:
    """Mention counts from the training split.

    Arrays are indexed by raw symptom id, so they carry the always-zero PAD
    row/column at index 0. A mention counts regardless of its attribute.
    """

    disease_symptom: np.ndarray  # (n_diseases, n_symptoms + 1) int64
    symptom_symptom: np.ndarray  # (n_symptoms + 1, n_symptoms + 1) int64
    symptom_marginal: np.ndarray  # (n_symptoms + 1,) int64

    def cooccurs(self, disease: int, symptom: int) -> bool:
        return bool(self.disease_symptom[disease, symptom] > 0)


def _validate_raw_record(rec: dict, index: int) -> None:
    if not isinstance(rec, dict):
        raise CorpusError(f"record {index}: not an object")
    for key in ("disease", "explicit", "implicit"):
        if key not in rec:
            raise CorpusError(f"record {index}: missing key {key!r}")
    for part in ("explicit", "implicit"):
        for item in rec[part]:
            if (
                not isinstance(item, (list, tuple))
                or len(item) != 2
                or not isinstance(item[0], str)
            ):
                raise CorpusError(f"record {index}: malformed {part} entry {item!r}")
            if item[1] not in ("POS", "NEG"):
                raise CorpusError(
                    f"record {index}: attribute must be POS or NEG, got {item[1]!r}"
                )
    if not rec["explicit"]:
        raise CorpusError(f"record {index}: empty explicit symptom list")
    names = [s for s, _ in rec["explicit"]] + [s for s, _ in rec["implicit"]]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise CorpusError(f"record {index}: duplicated symptom(s) {dupes}")


def read_raw_records(path: str | Path) -> list[dict]:
    """Parse a canonical dataset file into structurally validated dicts."""
    try:
        data = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise CorpusError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(data, list):
        raise CorpusError(f"{path}: expected a JSON array of records")
    for i, rec in enumerate(data):
        _validate_raw_record(rec, i)
    return data


def resolve_records(raw: Iterable[dict], vocab: Vocabulary) -> list[StructuredMCR]:
    """Map name-based raw records onto vocabulary ids.

    Unknown symptom or disease names raise; they never extend the vocabulary.
    """
    out = []
    for i, rec in enumerate(raw):
        explicit = tuple(
            (vocab.symptom_id(s), Attribute(a)) for s, a in rec["explicit"]
        )
        implicit = tuple(
            (vocab.symptom_id(s), Attribute(a)) for s, a in rec["implicit"]
        )
        out.append(
            StructuredMCR(
                record_id=str(rec.get("id", i)),
                explicit=explicit,
                implicit=implicit,
                disease=vocab.disease_id(rec["disease"]),
            )
        )
    return out


def record_to_raw(rec: StructuredMCR, vocab: Vocabulary) -> dict:
    return {
        "id": rec.record_id,
        "disease": vocab.disease_name(rec.disease),
        "explicit": [[vocab.symptom_name(s), a.value] for s, a in rec.explicit],
        "implicit": [[vocab.symptom_name(s), a.value] for s, a in rec.implicit],
    }


def save_corpus(records: Sequence[StructuredMCR], vocab: Vocabulary, path: str | Path) -> None:
    """Write records back to the canonical JSON format (stable key order)."""
    raw = [record_to_raw(r, vocab) for r in records]
    Path(path).write_text(
        json.dumps(raw, ensure_ascii=False, sort_keys=True, indent=1), "utf-8"
    )


def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    manifest = json.loads(path.read_text("utf-8"))
    if not isinstance(manifest, dict) or "vocabulary" not in manifest:
        raise CorpusError(f"{path}: manifest must map 'vocabulary' and split names to paths")
    resolved = {}
    for key, value in manifest.items():
        if key in SPLITS or key == "vocabulary":
            resolved[key] = path.parent / value
        else:
            resolved[key] = value
    return resolved


def load_corpus(path: str | Path, split: str) -> list[StructuredMCR]:
    """Load one split through a manifest file.

    `path` names a manifest JSON mapping split names and "vocabulary" to
    file paths (relative to the manifest). Every record is validated against
    the corpus invariants before it is returned.
    """
    if split not in SPLITS:
        raise CorpusError(f"unknown split {split!r}, expected one of {SPLITS}")
    manifest = load_manifest(path)
    if split not in manifest:
        raise CorpusError(f"manifest {path} has no {split!r} split")
    vocab = Vocabulary.load(manifest["vocabulary"])
    records = resolve_records(read_raw_records(manifest[split]), vocab)
    expected = manifest.get("expected", {})
    if expected:
        if "n_symptoms" in expected and vocab.n_symptoms != expected["n_symptoms"]:
            raise CorpusError(
                f"vocabulary has {vocab.n_symptoms} symptoms, manifest expects "
                f"{expected['n_symptoms']}"
            )
        if "n_diseases" in expected and vocab.n_diseases != expected["n_diseases"]:
            raise CorpusError(
                f"vocabulary has {vocab.n_diseases} diseases, manifest expects "
                f"{expected['n_diseases']}"
            )
    return records


def build_vocabulary(raw_records: Iterable[dict]) -> Vocabulary:
    """Build the vocabulary from raw train-split records.

    Names are ordered lexicographically so id assignment is reproducible.
    """
    raw_records = list(raw_records)
    if not raw_records:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    symptoms: set[str] = set()
    diseases: set[str] = set()
    for rec in raw_records:
        diseases.add(rec["disease"])
        for s, _ in rec["explicit"]:
            symptoms.add(s)
        for s, _ in rec["implicit"]:
            symptoms.add(s)
    return Vocabulary(sorted(symptoms), sorted(diseases))


def build_cooccurrence(records: Sequence[StructuredMCR], vocab: Vocabulary) -> CoOccurrence:
    """Count train-split mentions: disease-symptom, symptom-symptom pairs and
    per-symptom marginals. A record contributes at most 1 to each cell."""
    n_slots = vocab.n_symptom_slots
    ds = np.zeros((vocab.n_diseases, n_slots), dtype=np.int64)
    ss = np.zeros((n_slots, n_slots), dtype=np.int64)
    marginal = np.zeros(n_slots, dtype=np.int64)
    for rec in records:
        sids = [s for s, _ in rec.all_pairs]
        for s in sids:
            if not 1 <= s < n_slots:
                raise CorpusError(f"symptom id out of range: {s}")
            ds[rec.disease, s] += 1
            marginal[s] += 1
        for i, a in enumerate(sids):
            for b in sids[i + 1 :]:
                ss[a, b] += 1
                ss[b, a] += 1
    return CoOccurrence(disease_symptom=ds, symptom_symptom=ss, symptom_marginal=marginal)
