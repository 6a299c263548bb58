"""Reading the labeled pair dataset emitted by the analysis pipeline.

The only contract with the producer is the JSON-lines schema checked here;
nothing else about the pipeline is assumed.
"""

import json
from dataclasses import dataclass
from typing import List

from .config import SchemaError

REQUIRED_KEYS = frozenset(
    {
        "desc_patent_id",
        "claim_patent_id",
        "piece_index",
        "claim_number",
        "description",
        "claim",
        "label",
    }
)


@dataclass(frozen=True)
class PairExample:
    text_a: str
    text_b: str
    label: int


def read_pairs(path: str) -> List[PairExample]:
    """Load (description piece, claim) pairs with binary labels.

    Raises SchemaError naming the offending line for any record that does
    not carry the full pair schema or whose label is not the integer 0 or 1.
    """
    examples: List[PairExample] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise SchemaError(f"{path}:{lineno}: expected a JSON object")
            missing = REQUIRED_KEYS - record.keys()
            if missing:
                raise SchemaError(
                    f"{path}:{lineno}: missing keys: {', '.join(sorted(missing))}"
                )
            label = record["label"]
            # bool is a subclass of int; true/false are not valid labels.
            if isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1):
                raise SchemaError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            description = record["description"]
            claim = record["claim"]
            if not isinstance(description, str) or not isinstance(claim, str):
                raise SchemaError(f"{path}:{lineno}: description and claim must be strings")
            if not description.strip() or not claim.strip():
                raise SchemaError(f"{path}:{lineno}: description and claim must be non-empty")
            examples.append(PairExample(text_a=description, text_b=claim, label=label))
    if not examples:
        raise SchemaError(f"{path}: no pair records found")
    return examples
