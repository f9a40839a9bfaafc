"""One-time converter from the public datasets' pickle release to the
canonical JSON layout (dataset files, vocabulary, split manifest).

The supported raw shape is the widely redistributed one: a pickled dict (or
per-split pickles) whose records look like

    {"disease_tag": "...",
     "goal": {"explicit_inform_slots": {symptom: True|False, ...},
              "implicit_inform_slots": {symptom: True|False, ...}}}

with `goal` optionally inlined at the top level. True maps to POS and False
to NEG. A JSON file with the same structure is accepted as well.
"""

from __future__ import annotations

import json
import pickle
from pathlib import Path
from typing import Iterable

from .corpus import CorpusError, build_vocabulary


def _slots(record: dict, key: str) -> dict:
    goal = record.get("goal", record)
    slots = goal.get(key, {})
    if not isinstance(slots, dict):
        raise CorpusError(f"raw record field {key!r} is not a mapping")
    return slots


def _attr(value) -> str:
    if value in (True, "True", "true", "1", 1):
        return "POS"
    if value in (False, "False", "false", "0", 0):
        return "NEG"
    raise CorpusError(f"cannot interpret raw attribute value {value!r}")


def raw_record_to_canonical(record: dict, index: int) -> dict:
    disease = record.get("disease_tag") or record.get("disease")
    if not disease:
        raise CorpusError(f"raw record {index} has no disease tag")
    explicit_slots = _slots(record, "explicit_inform_slots")
    implicit_slots = _slots(record, "implicit_inform_slots")
    explicit = [[s, _attr(v)] for s, v in explicit_slots.items()]
    implicit = [
        [s, _attr(v)] for s, v in implicit_slots.items() if s not in explicit_slots
    ]
    return {
        "id": str(record.get("consult_id", record.get("id", index))),
        "disease": str(disease),
        "explicit": explicit,
        "implicit": implicit,
    }


def load_raw_file(path: Path):
    if path.suffix == ".json":
        return json.loads(path.read_text("utf-8"))
    with open(path, "rb") as f:
        return pickle.load(f)


def extract_splits(blob) -> dict[str, list[dict]]:
    """Raw releases come either as one dict of splits or as a bare list."""
    if isinstance(blob, dict):
        splits = {}
        for key in ("train", "dev", "test"):
            if key in blob:
                splits[key] = list(blob[key])
        if not splits:
            raise CorpusError("raw dict has none of the expected split keys")
        return splits
    if isinstance(blob, list):
        return {"train": blob}
    raise CorpusError(f"unsupported raw payload of type {type(blob).__name__}")


def convert_dataset(
    inputs: Iterable[tuple[str, Path]], out_dir: Path
) -> dict[str, int]:
    """Convert (split, raw-path) inputs into canonical files under out_dir.

    Writes one <split>.json per split plus vocab.json (built from the train
    split only) and manifest.json. Returns per-split record counts.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    per_split: dict[str, list[dict]] = {}
    for split, path in inputs:
        blob = load_raw_file(Path(path))
        if isinstance(blob, dict) and split == "*":
            for s, records in extract_splits(blob).items():
                per_split.setdefault(s, []).extend(
                    raw_record_to_canonical(r, i) for i, r in enumerate(records)
                )
        else:
            if isinstance(blob, list):
                records = blob
            else:
                splits = extract_splits(blob)
                if split not in splits:
                    raise CorpusError(
                        f"{path} has no {split!r} split (found {sorted(splits)})"
                    )
                records = splits[split]
            per_split.setdefault(split, []).extend(
                raw_record_to_canonical(r, i) for i, r in enumerate(records)
            )
    if "train" not in per_split:
        raise CorpusError("no train split among the converted inputs")

    vocab = build_vocabulary(per_split["train"])
    # dev/test may mention names absent from train; they must still resolve
    unknown = set()
    for split, records in per_split.items():
        if split == "train":
            continue
        for rec in records:
            for s, _ in rec["explicit"] + rec["implicit"]:
                if not vocab.has_symptom(s):
                    unknown.add(s)
    if unknown:
        vocab = build_vocabulary(
            [r for recs in per_split.values() for r in recs]
        )

    vocab.save(out_dir / "vocab.json")
    manifest = {"vocabulary": "vocab.json"}
    counts = {}
    for split, records in per_split.items():
        fname = f"{split}.json"
        (out_dir / fname).write_text(
            json.dumps(records, ensure_ascii=False, sort_keys=True, indent=1), "utf-8"
        )
        manifest[split] = fname
        counts[split] = len(records)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), "utf-8"
    )
    return counts
