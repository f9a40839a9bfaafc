"""Input validation helpers for the estimator-style entry points."""

from __future__ import annotations

from .corpus import (
    CorpusError,
    StructuredMCR,
    Vocabulary,
    _validate_raw_record,
    resolve_records,
)


def check_raw_records(records) -> list[dict]:
    """Validate a list of name-based record dicts (the on-disk JSON shape)."""
    if not isinstance(records, (list, tuple)):
        raise CorpusError("records must be a list of record dicts")
    if len(records) == 0:
        raise CorpusError("empty record list")
    for i, rec in enumerate(records):
        _validate_raw_record(rec, i)
    return list(records)


def as_structured(records, vocab: Vocabulary) -> list[StructuredMCR]:
    """Accept raw dicts or already-resolved records, returning resolved ones."""
    records = list(records)
    if all(isinstance(r, StructuredMCR) for r in records):
        return records
    return resolve_records(check_raw_records(records), vocab)


def check_is_fitted(estimator, attribute: str = "model_") -> None:
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
