"""WordPiece tokenization and fixed-length pair encoding.

Encoding layout for a (description, claim) pair:

    [CLS] desc tokens [SEP] claim tokens [SEP] [PAD] ... [PAD]

padded to exactly max_len positions. Segment ids are 0 through the first
separator, 1 through the second, and 0 over padding; the attention mask is 1
exactly on non-padding positions.
"""

import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import PipelineError

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)

DEFAULT_MAX_LEN = 500
# Words longer than this become [UNK] outright, matching the reference
# WordPiece implementation.
MAX_WORD_CHARS = 100


class VocabError(PipelineError):
    pass


class EmptyVocab(VocabError):
    pass


class MissingSpecial(VocabError):
    def __init__(self, token: str):
        super().__init__(f"vocabulary is missing special token {token}")
        self.token = token


class DuplicateToken(VocabError):
    def __init__(self, token: str):
        super().__init__(f"duplicate vocabulary token {token!r}")
        self.token = token


class EmptySegment(PipelineError):
    def __init__(self, which: str):
        super().__init__(f"{which} text produced no tokens")
        self.which = which


class MaxLenTooSmall(PipelineError):
    pass


@dataclass
class Vocabulary:
    """Token table with dense ids; line number in the vocab file is the id."""

    token_to_id: dict[str, int]
    id_to_token: list[str]
    pad_id: int
    unk_id: int
    cls_id: int
    sep_id: int

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)

    def tokens_of(self, ids: Iterable[int]) -> list[str]:
        return [self.id_to_token[token_id] for token_id in ids]

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        if not tokens:
            raise EmptyVocab("no tokens")
        token_to_id: dict[str, int] = {}
        for token in tokens:
            if token in token_to_id:
                raise DuplicateToken(token)
            token_to_id[token] = len(token_to_id)
        for special in SPECIAL_TOKENS:
            if special not in token_to_id:
                raise MissingSpecial(special)
        return cls(
            token_to_id=token_to_id,
            id_to_token=list(tokens),
            pad_id=token_to_id[PAD_TOKEN],
            unk_id=token_to_id[UNK_TOKEN],
            cls_id=token_to_id[CLS_TOKEN],
            sep_id=token_to_id[SEP_TOKEN],
        )


def load_vocabulary(path: str) -> Vocabulary:
    """Load a one-token-per-line vocabulary file (id = zero-based line number)."""
    with open(path, encoding="utf-8") as handle:
        raw = handle.read()
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise EmptyVocab(str(path))
    tokens = []
    for line_no, line in enumerate(lines, start=1):
        token = line.rstrip("\r")
        if not token:
            raise VocabError(f"empty token at line {line_no}")
        tokens.append(token)
    return Vocabulary.from_tokens(tokens)


def save_vocabulary(path: str, tokens: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for token in tokens:
            handle.write(token)
            handle.write("\n")


def _is_whitespace(char: str) -> bool:
    if char in (" ", "\t", "\n", "\r"):
        return True
    return unicodedata.category(char) == "Zs"


def _is_control(char: str) -> bool:
    if char in ("\t", "\n", "\r"):
        return False
    return unicodedata.category(char).startswith("C")


def _is_punctuation(char: str) -> bool:
    code = ord(char)
    # ASCII punctuation ranges, then general Unicode punctuation categories.
    if (
        (33 <= code <= 47)
        or (58 <= code <= 64)
        or (91 <= code <= 96)
        or (123 <= code <= 126)
    ):
        return True
    return unicodedata.category(char).startswith("P")


def basic_tokenize(text: str) -> list[str]:
    """Lowercase, strip control characters, split on whitespace and punctuation.

    Punctuation characters become standalone tokens; accents are kept as-is.
    """
    cleaned = []
    for char in text:
        code = ord(char)
        if code == 0 or code == 0xFFFD or _is_control(char):
            continue
        cleaned.append(" " if _is_whitespace(char) else char)
    tokens: list[str] = []
    for word in "".join(cleaned).split():
        word = word.lower()
        current: list[str] = []
        for char in word:
            if _is_punctuation(char):
                if current:
                    tokens.append("".join(current))
                    current = []
                tokens.append(char)
            else:
                current.append(char)
        if current:
            tokens.append("".join(current))
    return tokens


def wordpiece_tokenize(text: str, vocab: Vocabulary) -> list[str]:
    """Greedy longest-match-first subword segmentation.

    Continuation pieces carry the "##" prefix; a word with no valid
    segmentation (or longer than MAX_WORD_CHARS) becomes [UNK]. Example with
    vocab {un, ##aff, ##able}: "unaffable" -> [un, ##aff, ##able].
    """
    output: list[str] = []
    for word in basic_tokenize(text):
        if len(word) > MAX_WORD_CHARS:
            output.append(UNK_TOKEN)
            continue
        start = 0
        subtokens: list[str] = []
        while start < len(word):
            end = len(word)
            match = None
            while start < end:
                piece = word[start:end]
                if start > 0:
                    piece = "##" + piece
                if piece in vocab:
                    match = piece
                    break
                end -= 1
            if match is None:
                subtokens = None
                break
            subtokens.append(match)
            start = end
        if subtokens is None:
            output.append(UNK_TOKEN)
        else:
            output.extend(subtokens)
    return output


@dataclass(frozen=True)
class EncodedSequence:
    token_ids: tuple[int, ...]
    segment_ids: tuple[int, ...]
    attention_mask: tuple[int, ...]
    label: Optional[int] = None


def encode_pair(
    desc_text: str,
    claim_text: str,
    vocab: Vocabulary,
    max_len: int = DEFAULT_MAX_LEN,
    label: Optional[int] = None,
) -> EncodedSequence:
    """Encode a (description, claim) pair into fixed-length id sequences.

    When the pair exceeds max_len - 3 content tokens, the final token of the
    currently longer segment is dropped repeatedly; on ties the claim loses a
    token, so the description keeps one more. Both segments always keep at
    least one token.
    """
    if max_len < 5:
        raise MaxLenTooSmall(f"max_len must be >= 5, got {max_len}")
    desc = wordpiece_tokenize(desc_text, vocab)
    claim = wordpiece_tokenize(claim_text, vocab)
    if not desc:
        raise EmptySegment("description")
    if not claim:
        raise EmptySegment("claim")
    budget = max_len - 3
    while len(desc) + len(claim) > budget:
        if len(desc) > len(claim):
            desc.pop()
        else:
            claim.pop()
    token_ids = (
        [vocab.cls_id]
        + [vocab.id_of(token) for token in desc]
        + [vocab.sep_id]
        + [vocab.id_of(token) for token in claim]
        + [vocab.sep_id]
    )
    segment_ids = [0] * (len(desc) + 2) + [1] * (len(claim) + 1)
    attention_mask = [1] * len(token_ids)
    padding = max_len - len(token_ids)
    token_ids.extend([vocab.pad_id] * padding)
    segment_ids.extend([0] * padding)
    attention_mask.extend([0] * padding)
    return EncodedSequence(
        token_ids=tuple(token_ids),
        segment_ids=tuple(segment_ids),
        attention_mask=tuple(attention_mask),
        label=label,
    )


def decode_segments(
    encoded: EncodedSequence, vocab: Vocabulary
) -> tuple[list[str], list[str]]:
    """Recover the (description, claim) token lists from an encoded pair."""
    ids = list(encoded.token_ids)
    first_sep = ids.index(vocab.sep_id)
    second_sep = ids.index(vocab.sep_id, first_sep + 1)
    return (
        vocab.tokens_of(ids[1:first_sep]),
        vocab.tokens_of(ids[first_sep + 1 : second_sep]),
    )


def vocab_tokens_from_texts(
    texts: Iterable[str], min_freq: int = 1, max_size: Optional[int] = None
) -> list[str]:
    """Derive a word-level vocabulary (specials first, then by frequency)."""
    counts: Counter = Counter()
    for text in texts:
        counts.update(basic_tokenize(text))
    ranked = sorted(
        (token for token, count in counts.items() if count >= min_freq),
        key=lambda token: (-counts[token], token),
    )
    if max_size is not None:
        ranked = ranked[: max(0, max_size - len(SPECIAL_TOKENS))]
    return list(SPECIAL_TOKENS) + ranked


def encoded_to_record(encoded: EncodedSequence) -> dict:
    record = {
        "token_ids": list(encoded.token_ids),
        "segment_ids": list(encoded.segment_ids),
        "attention_mask": list(encoded.attention_mask),
    }
    if encoded.label is not None:
        record["label"] = encoded.label
    return record
