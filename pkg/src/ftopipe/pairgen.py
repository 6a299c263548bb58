"""Build balanced labeled (description piece, claim) training pairs.

Positives pair each piece with the selected independent claims of its own
patent; negatives re-draw the same pieces and claims across different patents,
one per positive, so both labels occur with the same frequency.
"""

import random
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .corpus import Claim
from .errors import PipelineError
from .slicer import DescriptionPiece
from .util import derive_seed, read_jsonl, write_jsonl

LABEL_MATCHED = 1
LABEL_MISMATCHED = 0


class MissingClaims(PipelineError):
    def __init__(self, patent_id: str):
        super().__init__(f"no claims available for patent {patent_id!r}")
        self.patent_id = patent_id


class NoNegativeSource(PipelineError):
    pass


class InvalidSize(PipelineError):
    pass


@dataclass(frozen=True)
class TrainingPair:
    desc_patent_id: str
    claim_patent_id: str
    piece_index: int
    description_text: str
    claim_text: str
    claim_number: int
    label: int


ClaimSource = Mapping[str, Sequence[Claim]]


def generate_positive_pairs(
    pieces: Sequence[DescriptionPiece], claim_source: ClaimSource
) -> list[TrainingPair]:
    """One matched pair per (piece, own-patent claim) combination."""
    pairs = []
    for piece in pieces:
        claims = claim_source.get(piece.patent_id)
        if not claims:
            raise MissingClaims(piece.patent_id)
        for claim in claims:
            pairs.append(
                TrainingPair(
                    desc_patent_id=piece.patent_id,
                    claim_patent_id=piece.patent_id,
                    piece_index=piece.piece_index,
                    description_text=piece.text,
                    claim_text=claim.text,
                    claim_number=claim.number,
                    label=LABEL_MATCHED,
                )
            )
    return pairs


def generate_negative_pairs(
    pieces: Sequence[DescriptionPiece],
    claim_source: ClaimSource,
    count: int,
    seed: int = 0,
) -> list[TrainingPair]:
    """Draw cross-patent (piece, claim) pairs, uniform over pieces and over
    the claims of every other patent.

    Each draw's randomness is derived from (seed, draw index), so generation
    order and parallel batching cannot change the output.
    """
    if count < 0:
        raise InvalidSize(f"negative count must be >= 0, got {count}")
    if count == 0:
        return []
    if not pieces:
        raise NoNegativeSource("no description pieces to sample from")
    flat: list[tuple[str, Claim]] = []
    for patent_id in sorted(claim_source):
        for claim in claim_source[patent_id]:
            flat.append((patent_id, claim))
    if len({patent_id for patent_id, _ in flat}) < 2:
        raise NoNegativeSource("need claims from at least two distinct patents")
    # Claims are grouped by patent id, so each patent occupies one contiguous
    # range; a cross-patent draw skips that range in O(1).
    group_range: dict[str, tuple[int, int]] = {}
    for index, (patent_id, _) in enumerate(flat):
        start, length = group_range.get(patent_id, (index, 0))
        group_range[patent_id] = (start, length + 1)
    pairs = []
    for draw in range(count):
        rng = random.Random(derive_seed(seed, "negative", draw))
        piece = pieces[rng.randrange(len(pieces))]
        start, length = group_range.get(piece.patent_id, (0, 0))
        pick = rng.randrange(len(flat) - length)
        if pick >= start:
            pick += length
        claim_patent_id, claim = flat[pick]
        pairs.append(
            TrainingPair(
                desc_patent_id=piece.patent_id,
                claim_patent_id=claim_patent_id,
                piece_index=piece.piece_index,
                description_text=piece.text,
                claim_text=claim.text,
                claim_number=claim.number,
                label=LABEL_MISMATCHED,
            )
        )
    return pairs


def build_dataset(
    pieces: Sequence[DescriptionPiece], claim_source: ClaimSource, seed: int = 0
) -> list[TrainingPair]:
    """Positives plus an equal number of negatives, shuffled with the seed.

    Negatives reuse only patents that contributed pieces, so every negative's
    texts also appear somewhere in the positive pool.
    """
    piece_patents = {piece.patent_id for piece in pieces}
    source = {
        patent_id: claims
        for patent_id, claims in claim_source.items()
        if patent_id in piece_patents
    }
    positives = generate_positive_pairs(pieces, source)
    if not positives:
        return []
    negatives = generate_negative_pairs(pieces, source, len(positives), seed)
    combined = positives + negatives
    random.Random(derive_seed(seed, "shuffle")).shuffle(combined)
    return combined


def split_validation(
    pairs: Sequence[TrainingPair], validation: Union[int, float], seed: int = 0
) -> tuple[list[TrainingPair], list[TrainingPair]]:
    """Hold out pairs for validation, by pair, seeded; returns (train, held out).

    validation is either an absolute count or a fraction in [0, 1); the
    requested size must leave at least one training pair.
    """
    total = len(pairs)
    if isinstance(validation, float):
        if not 0.0 <= validation < 1.0:
            raise InvalidSize(f"validation fraction must be in [0, 1), got {validation}")
        count = int(round(total * validation))
    else:
        count = int(validation)
    if count < 0 or (total > 0 and count >= total):
        raise InvalidSize(f"validation size {count} out of range for {total} pairs")
    rng = random.Random(derive_seed(seed, "validation"))
    chosen = set(rng.sample(range(total), count))
    train = [pair for index, pair in enumerate(pairs) if index not in chosen]
    held_out = [pair for index, pair in enumerate(pairs) if index in chosen]
    return train, held_out


def pair_to_record(pair: TrainingPair) -> dict:
    return {
        "desc_patent_id": pair.desc_patent_id,
        "claim_patent_id": pair.claim_patent_id,
        "piece_index": pair.piece_index,
        "claim_number": pair.claim_number,
        "description": pair.description_text,
        "claim": pair.claim_text,
        "label": pair.label,
    }


def write_pairs(path: str, pairs: Sequence[TrainingPair]) -> int:
    return write_jsonl(path, (pair_to_record(pair) for pair in pairs))


def read_pairs(path: str) -> list[TrainingPair]:
    pairs = []
    for index, record in enumerate(read_jsonl(path), start=1):
        try:
            pair = TrainingPair(
                desc_patent_id=record["desc_patent_id"],
                claim_patent_id=record["claim_patent_id"],
                piece_index=int(record["piece_index"]),
                description_text=record["description"],
                claim_text=record["claim"],
                claim_number=int(record["claim_number"]),
                label=int(record["label"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PipelineError(f"pairs file record {index}: {exc}") from exc
        if pair.label not in (LABEL_MATCHED, LABEL_MISMATCHED):
            raise PipelineError(
                f"pairs file record {index}: label must be 0 or 1, got {pair.label}"
            )
        pairs.append(pair)
    return pairs
