"""Rank candidate independent claims against a query description.

Candidates are ordered by descending matched-label logit; equal scores fall
back to (patent id, claim number) ascending so rankings are total and
reproducible.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .corpus import PatentDoc, independent_claims
from .encoder import DEFAULT_MAX_LEN, Vocabulary, wordpiece_tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryInput:
    query_id: str
    description_ip: str
    patent_id: str
    claim_number: int
    claim_text: str

    @property
    def candidate(self) -> tuple[str, int, str]:
        return (self.patent_id, self.claim_number, self.claim_text)


@dataclass(frozen=True)
class RankedResult:
    rank: int
    patent_id: str
    claim_number: int
    logit_1: float
    prob_1: float


def build_query_inputs(
    description_ip: str,
    candidates: Iterable[PatentDoc],
    claim_mode: str = "first_only",
    query_id: str = "query",
    vocab: Optional[Vocabulary] = None,
    max_len: int = DEFAULT_MAX_LEN,
) -> list[QueryInput]:
    """Pair the query description with every candidate independent claim.

    When a vocabulary is supplied, pairs that would not fit max_len untruncated
    are counted and logged as a warning; truncation itself happens at encoding
    time.
    """
    if not description_ip.strip():
        raise ValueError("description_ip must be nonempty")
    desc_token_count = (
        len(wordpiece_tokenize(description_ip, vocab)) if vocab is not None else None
    )
    inputs = []
    truncated = 0
    for doc in candidates:
        for claim in independent_claims(doc, claim_mode):
            if not claim.text.strip():
                raise ValueError(f"claim {doc.id}#{claim.number} has empty text")
            if desc_token_count is not None:
                claim_token_count = len(wordpiece_tokenize(claim.text, vocab))
                if desc_token_count + claim_token_count + 3 > max_len:
                    truncated += 1
            inputs.append(
                QueryInput(
                    query_id=query_id,
                    description_ip=description_ip,
                    patent_id=doc.id,
                    claim_number=claim.number,
                    claim_text=claim.text,
                )
            )
    if truncated:
        logger.warning(
            "%d of %d query pairs exceed max_len %d and will be truncated",
            truncated,
            len(inputs),
            max_len,
        )
    return inputs


def rank(
    description_ip: str,
    candidates: Iterable[PatentDoc],
    scorer,
    top_k: Optional[int] = None,
    claim_mode: str = "first_only",
    query_id: str = "query",
) -> list[RankedResult]:
    """Score all candidate claims and return the top_k (all when top_k is None)."""
    if top_k is not None and top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    inputs = build_query_inputs(description_ip, candidates, claim_mode, query_id)
    batch = [
        (entry.query_id, f"{entry.patent_id}#{entry.claim_number}", entry.description_ip, entry.claim_text)
        for entry in inputs
    ]
    scores = scorer.score_batch(batch)
    rows = sorted(
        zip(inputs, scores),
        key=lambda row: (-row[1].logit_1, row[0].patent_id, row[0].claim_number),
    )
    if top_k is not None:
        rows = rows[:top_k]
    return [
        RankedResult(
            rank=position + 1,
            patent_id=entry.patent_id,
            claim_number=entry.claim_number,
            logit_1=score.logit_1,
            prob_1=score.prob_1,
        )
        for position, (entry, score) in enumerate(rows)
    ]


def ranked_to_records(results: Sequence[RankedResult]) -> list[dict]:
    return [
        {
            "rank": result.rank,
            "patent_id": result.patent_id,
            "claim_number": result.claim_number,
            "logit_1": result.logit_1,
            "prob_1": result.prob_1,
        }
        for result in results
    ]


def render_table(
    reference_label: str,
    results: Sequence[RankedResult],
    header_left: str = "Reference patent",
    header_right: str = "Pos. / FTO-patent",
) -> str:
    """Two-column text table: the reference on the left, ranked hits on the right."""
    width = max(len(header_left), len(reference_label))
    lines = [
        f"{header_left:<{width}} | {header_right}",
        f"{'-' * width}-+-{'-' * len(header_right)}",
    ]
    for index, result in enumerate(results):
        left = reference_label if index == 0 else ""
        entry = result.patent_id
        if result.claim_number != 1:
            entry = f"{result.patent_id} (claim {result.claim_number})"
        lines.append(f"{left:<{width}} | {result.rank}.  {entry}")
    return "\n".join(lines)
