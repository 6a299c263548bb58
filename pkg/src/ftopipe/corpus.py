"""Patent corpus ingestion: load, validate, filter, and split JSON-lines corpora.

A corpus is one JSON object per line with fields id, kind_code, language,
classifications, abstract, description, and claims (each claim an object with
number, text, and optionally is_independent). Unknown fields are ignored.
"""

import json
import logging
import random
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import PipelineError
from .util import write_jsonl

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = (
    "id",
    "kind_code",
    "language",
    "classifications",
    "abstract",
    "description",
    "claims",
)

# Back-reference phrases marking a claim as dependent; consulted only when the
# record does not carry an explicit is_independent flag.
_DEPENDENT_PHRASES = (
    "according to claim",
    "of claim",
    "of claims",
    "as claimed in claim",
)

CLAIM_MODES = ("first_only", "all")


class MalformedRecord(PipelineError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(PipelineError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate publication number {doc_id!r}")
        self.doc_id = doc_id


class UnknownId(PipelineError):
    def __init__(self, doc_id: str):
        super().__init__(f"unknown publication number {doc_id!r}")
        self.doc_id = doc_id


class NoIndependentClaim(PipelineError):
    def __init__(self, doc_id: str):
        super().__init__(f"patent {doc_id!r} has no independent claim")
        self.doc_id = doc_id


@dataclass(frozen=True)
class Claim:
    number: int
    text: str
    is_independent: bool


@dataclass(frozen=True)
class PatentDoc:
    id: str
    kind_code: str
    language: str
    classifications: tuple[str, ...]
    abstract: str
    description: str
    claims: tuple[Claim, ...]


@dataclass
class LoadResult:
    """Validated docs in file order plus per-line rejections (non-strict mode)."""

    docs: list[PatentDoc]
    skipped: list[tuple[int, str]]
    total_lines: int


def _looks_dependent(text: str) -> bool:
    lowered = text.lower()
    return any(phrase in lowered for phrase in _DEPENDENT_PHRASES)


def _parse_claim(raw: object, index: int) -> Claim:
    where = f"claims[{index}]"
    if not isinstance(raw, dict):
        raise ValueError(f"{where}: expected an object")
    if "number" not in raw:
        raise ValueError(f"{where}: missing field number")
    number = raw["number"]
    if isinstance(number, bool) or not isinstance(number, int) or number < 1:
        raise ValueError(f"{where}: number must be a positive integer")
    if "text" not in raw:
        raise ValueError(f"{where}: missing field text")
    text = raw["text"]
    if not isinstance(text, str) or not text.strip():
        raise ValueError(f"{where}: text must be a nonempty string")
    if "is_independent" in raw:
        flag = raw["is_independent"]
        if not isinstance(flag, bool):
            raise ValueError(f"{where}: is_independent must be a boolean")
    else:
        flag = not _looks_dependent(text)
    return Claim(number=number, text=text, is_independent=flag)


def _parse_record(line: str) -> PatentDoc:
    if not line:
        raise ValueError("empty line")
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ValueError("record is not a JSON object")
    for field in REQUIRED_FIELDS:
        if field not in raw:
            raise ValueError(f"missing field {field}")
    doc_id = raw["id"]
    if not isinstance(doc_id, str) or not doc_id:
        raise ValueError("field id must be a nonempty string")
    for field in ("kind_code", "language", "abstract", "description"):
        if not isinstance(raw[field], str):
            raise ValueError(f"field {field} must be a string")
    classifications = raw["classifications"]
    if not isinstance(classifications, list) or any(
        not isinstance(entry, str) for entry in classifications
    ):
        raise ValueError("field classifications must be a list of strings")
    claims_raw = raw["claims"]
    if not isinstance(claims_raw, list) or not claims_raw:
        raise ValueError("field claims must be a nonempty list")
    claims = tuple(_parse_claim(entry, index) for index, entry in enumerate(claims_raw))
    numbers = [claim.number for claim in claims]
    if any(later <= earlier for earlier, later in zip(numbers, numbers[1:])):
        raise ValueError("claim numbers must be strictly increasing")
    return PatentDoc(
        id=doc_id,
        kind_code=raw["kind_code"],
        language=raw["language"],
        classifications=tuple(classifications),
        abstract=raw["abstract"],
        description=raw["description"],
        claims=claims,
    )


def load_corpus(path: str, strict: bool = False) -> LoadResult:
    """Load and validate a JSON-lines corpus.

    In non-strict mode invalid records are skipped and recorded with their
    line number and reason; in strict mode the first invalid record raises
    MalformedRecord. Duplicate publication numbers are an error in both modes.
    """
    docs: list[PatentDoc] = []
    skipped: list[tuple[int, str]] = []
    seen: set[str] = set()
    total = 0
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            total += 1
            try:
                doc = _parse_record(line.strip())
            except ValueError as exc:
                if strict:
                    raise MalformedRecord(line_no, str(exc)) from exc
                skipped.append((line_no, str(exc)))
                continue
            if doc.id in seen:
                raise DuplicateId(doc.id)
            seen.add(doc.id)
            docs.append(doc)
    if skipped:
        logger.warning("skipped %d invalid corpus records", len(skipped))
    return LoadResult(docs=docs, skipped=skipped, total_lines=total)


def doc_to_record(doc: PatentDoc) -> dict:
    return {
        "id": doc.id,
        "kind_code": doc.kind_code,
        "language": doc.language,
        "classifications": list(doc.classifications),
        "abstract": doc.abstract,
        "description": doc.description,
        "claims": [
            {
                "number": claim.number,
                "text": claim.text,
                "is_independent": claim.is_independent,
            }
            for claim in doc.claims
        ],
    }


def write_corpus(path: str, docs: Iterable[PatentDoc]) -> int:
    return write_jsonl(path, (doc_to_record(doc) for doc in docs))


def filter_corpus(
    docs: Iterable[PatentDoc],
    class_prefix: str = "",
    languages: Iterable[str] = ("en",),
    kinds: Iterable[str] = (),
) -> list[PatentDoc]:
    """Keep docs matching a classification prefix, language set, and kind codes.

    An empty class_prefix matches every doc; an empty kinds set means any kind.
    """
    language_set = set(languages)
    kind_set = set(kinds)
    kept = []
    for doc in docs:
        if class_prefix and not any(
            entry.startswith(class_prefix) for entry in doc.classifications
        ):
            continue
        if doc.language not in language_set:
            continue
        if kind_set and doc.kind_code not in kind_set:
            continue
        kept.append(doc)
    return kept


def split_disjoint(
    docs: list[PatentDoc],
    search: Union[float, Iterable[str]],
    seed: int = 0,
) -> tuple[list[PatentDoc], list[PatentDoc]]:
    """Split docs into disjoint (train, search) pools.

    search is either a fraction in (0, 1), sampled with the given seed, or an
    explicit collection of publication numbers that must all exist.
    Both pools preserve the input doc order.
    """
    ids = [doc.id for doc in docs]
    if isinstance(search, float):
        if not 0.0 < search < 1.0:
            raise ValueError(f"search fraction must be in (0, 1), got {search}")
        count = int(round(len(docs) * search))
        rng = random.Random(seed)
        chosen = set(rng.sample(ids, count))
    else:
        chosen = {str(doc_id) for doc_id in search}
        unknown = sorted(chosen - set(ids))
        if unknown:
            raise UnknownId(unknown[0])
    train = [doc for doc in docs if doc.id not in chosen]
    found = [doc for doc in docs if doc.id in chosen]
    return train, found


def independent_claims(doc: PatentDoc, mode: str = "first_only") -> list[Claim]:
    """Select the doc's independent claims: the lowest-numbered one, or all."""
    if mode not in CLAIM_MODES:
        raise ValueError(f"claim mode must be one of {CLAIM_MODES}, got {mode!r}")
    chosen = sorted(
        (claim for claim in doc.claims if claim.is_independent),
        key=lambda claim: claim.number,
    )
    if not chosen:
        raise NoIndependentClaim(doc.id)
    return chosen[:1] if mode == "first_only" else chosen
