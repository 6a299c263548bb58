"""Slice patent descriptions into random-length word pieces.

Pieces are drawn uniformly between the word bounds; a tail shorter than the
minimum is absorbed into the final piece, so every piece except the last is
within [min_words, max_words] and the last is at most max_words + min_words - 1
(or shorter when the whole description is shorter than min_words).
"""

import logging
import random
from dataclasses import dataclass
from typing import Iterable

from .corpus import PatentDoc
from .errors import PipelineError
from .util import derive_seed, ordered_map, write_jsonl

logger = logging.getLogger(__name__)

DEFAULT_MIN_WORDS = 100
DEFAULT_MAX_WORDS = 200


class EmptyDescription(PipelineError):
    def __init__(self, doc_id: str):
        super().__init__(f"patent {doc_id!r} has an empty description")
        self.doc_id = doc_id


class InvalidBounds(PipelineError):
    pass


@dataclass(frozen=True)
class DescriptionPiece:
    patent_id: str
    piece_index: int
    text: str
    word_count: int


def slice_description(
    doc: PatentDoc,
    min_words: int = DEFAULT_MIN_WORDS,
    max_words: int = DEFAULT_MAX_WORDS,
    seed: int = 0,
) -> list[DescriptionPiece]:
    """Partition one description into pieces; deterministic per (seed, doc id).

    The random stream is derived from (seed, patent id) alone, so slicing a
    doc inside any batch, in any order, on any thread count, yields the same
    pieces.
    """
    if min_words <= 0 or min_words > max_words:
        raise InvalidBounds(
            f"need 0 < min_words <= max_words, got ({min_words}, {max_words})"
        )
    words = doc.description.split()
    if not words:
        raise EmptyDescription(doc.id)
    rng = random.Random(derive_seed(seed, doc.id))
    pieces: list[DescriptionPiece] = []
    position = 0
    total = len(words)
    while position < total:
        length = rng.randint(min_words, max_words)
        if total - position - length < min_words:
            # Absorb a sub-minimum tail; also covers the short sole piece.
            length = total - position
        chunk = words[position : position + length]
        pieces.append(
            DescriptionPiece(
                patent_id=doc.id,
                piece_index=len(pieces),
                text=" ".join(chunk),
                word_count=len(chunk),
            )
        )
        position += length
    return pieces


def slice_corpus(
    docs: Iterable[PatentDoc],
    min_words: int = DEFAULT_MIN_WORDS,
    max_words: int = DEFAULT_MAX_WORDS,
    seed: int = 0,
    threads: int = 1,
) -> tuple[list[DescriptionPiece], list[str]]:
    """Slice every doc with a nonempty description; returns (pieces, skipped ids)."""
    docs = list(docs)

    def one(doc: PatentDoc):
        if not doc.description.split():
            return None
        return slice_description(doc, min_words, max_words, seed)

    results = ordered_map(one, docs, threads)
    pieces: list[DescriptionPiece] = []
    skipped: list[str] = []
    for doc, result in zip(docs, results):
        if result is None:
            skipped.append(doc.id)
        else:
            pieces.extend(result)
    if skipped:
        logger.warning("skipped %d docs with empty descriptions", len(skipped))
    return pieces, skipped


def write_pieces(path: str, pieces: Iterable[DescriptionPiece]) -> int:
    return write_jsonl(
        path,
        (
            {
                "patent_id": piece.patent_id,
                "piece_index": piece.piece_index,
                "text": piece.text,
            }
            for piece in pieces
        ),
    )
