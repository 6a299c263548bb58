import pytest
from hypothesis import given, settings, strategies as st

from ftopipe.encoder import (
    CLS_TOKEN,
    PAD_TOKEN,
    SEP_TOKEN,
    UNK_TOKEN,
    DuplicateToken,
    EmptySegment,
    EmptyVocab,
    MaxLenTooSmall,
    MissingSpecial,
    VocabError,
    Vocabulary,
    basic_tokenize,
    decode_segments,
    encode_pair,
    load_vocabulary,
    save_vocabulary,
    vocab_tokens_from_texts,
    wordpiece_tokenize,
)

TINY_TOKENS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "image", "cache", "render"]
TINY_VOCAB = Vocabulary.from_tokens(TINY_TOKENS)


@pytest.fixture
def tiny_vocab():
    return TINY_VOCAB


def word_vocab(words):
    return Vocabulary.from_tokens(["[PAD]", "[UNK]", "[CLS]", "[SEP]", *words])


class TestVocabulary:
    def test_load_assigns_line_number_ids(self, tmp_path):
        path = tmp_path / "vocab.txt"
        save_vocabulary(path, TINY_TOKENS)
        vocab = load_vocabulary(path)
        assert len(vocab) == 7
        assert vocab.token_to_id["image"] == 4
        assert (vocab.pad_id, vocab.unk_id, vocab.cls_id, vocab.sep_id) == (0, 1, 2, 3)

    def test_missing_special_raises(self, tmp_path):
        path = tmp_path / "vocab.txt"
        save_vocabulary(path, ["[PAD]", "[UNK]", "[SEP]", "word"])
        with pytest.raises(MissingSpecial) as excinfo:
            load_vocabulary(path)
        assert excinfo.value.token == CLS_TOKEN

    def test_duplicate_token_raises(self, tmp_path):
        path = tmp_path / "vocab.txt"
        save_vocabulary(path, TINY_TOKENS + ["image"])
        with pytest.raises(DuplicateToken):
            load_vocabulary(path)

    def test_empty_file_raises(self, tmp_path):
        path = tmp_path / "vocab.txt"
        path.write_text("")
        with pytest.raises(EmptyVocab):
            load_vocabulary(path)

    def test_interior_empty_line_raises(self, tmp_path):
        path = tmp_path / "vocab.txt"
        path.write_text("[PAD]\n\n[UNK]\n[CLS]\n[SEP]\n")
        with pytest.raises(VocabError):
            load_vocabulary(path)


class TestBasicTokenize:
    def test_lowercases_and_splits_punctuation(self):
        assert basic_tokenize("The image-CACHE, renders.") == [
            "the", "image", "-", "cache", ",", "renders", ".",
        ]

    def test_strips_control_characters(self):
        assert basic_tokenize("ima\x00ge​ cache") == ["image", "cache"]

    def test_whitespace_variants_split(self):
        assert basic_tokenize("a\tb\nc\r d") == ["a", "b", "c", "d"]


class TestWordPiece:
    def test_greedy_longest_match_with_continuations(self):
        vocab = word_vocab(["un", "##aff", "##able", "##a"])
        assert wordpiece_tokenize("unaffable", vocab) == ["un", "##aff", "##able"]

    def test_unknown_word_maps_to_unk(self, tiny_vocab):
        assert wordpiece_tokenize("zebra", tiny_vocab) == [UNK_TOKEN]

    def test_case_folds_to_vocab(self, tiny_vocab):
        assert wordpiece_tokenize("Image CACHE", tiny_vocab) == ["image", "cache"]

    def test_unsegmentable_suffix_makes_whole_word_unk(self):
        vocab = word_vocab(["un"])
        assert wordpiece_tokenize("unzzz", vocab) == [UNK_TOKEN]

    def test_very_long_word_is_unk(self, tiny_vocab):
        assert wordpiece_tokenize("x" * 101, tiny_vocab) == [UNK_TOKEN]


class TestEncodePair:
    def test_worked_example(self, tiny_vocab):
        encoded = encode_pair("image cache", "render cache", tiny_vocab, max_len=10)
        assert list(encoded.token_ids) == [2, 4, 5, 3, 6, 5, 3, 0, 0, 0]
        assert list(encoded.segment_ids) == [0, 0, 0, 0, 1, 1, 1, 0, 0, 0]
        assert list(encoded.attention_mask) == [1, 1, 1, 1, 1, 1, 1, 0, 0, 0]

    def test_truncation_drops_from_longer_segment(self):
        vocab = word_vocab([f"w{i}" for i in range(10)])
        # 6-token description, 2-token claim, max_len 8: budget is 5, so the
        # description shrinks to 3 while the claim keeps both tokens.
        desc = " ".join(f"w{i}" for i in range(6))
        encoded = encode_pair(desc, "w8 w9", vocab, max_len=8)
        desc_tokens, claim_tokens = decode_segments(encoded, vocab)
        assert desc_tokens == ["w0", "w1", "w2"]
        assert claim_tokens == ["w8", "w9"]

    def test_symmetric_overflow_truncates_to_249_248(self):
        # Oracle: simulate the alternating trim loop independently. Starting
        # from (300, 300) with budget 497, ties drop from the claim side.
        desc_len, claim_len = 300, 300
        budget = 500 - 3
        while desc_len + claim_len > budget:
            if desc_len > claim_len:
                desc_len -= 1
            else:
                claim_len -= 1
        assert (desc_len, claim_len) == (249, 248)

        vocab = word_vocab([f"w{i}" for i in range(600)])
        desc = " ".join(f"w{i}" for i in range(300))
        claim = " ".join(f"w{i}" for i in range(300, 600))
        encoded = encode_pair(desc, claim, vocab, max_len=500)
        desc_tokens, claim_tokens = decode_segments(encoded, vocab)
        assert len(desc_tokens) == 249
        assert len(claim_tokens) == 248
        assert desc_tokens == [f"w{i}" for i in range(249)]
        assert claim_tokens == [f"w{i}" for i in range(300, 548)]

    def test_empty_segment_raises(self, tiny_vocab):
        with pytest.raises(EmptySegment):
            encode_pair("", "render", tiny_vocab, max_len=10)
        with pytest.raises(EmptySegment):
            encode_pair("image", "  ", tiny_vocab, max_len=10)

    def test_max_len_too_small_raises(self, tiny_vocab):
        with pytest.raises(MaxLenTooSmall):
            encode_pair("image", "render", tiny_vocab, max_len=4)

    def test_roundtrip_decodes_original_tokens(self, tiny_vocab):
        encoded = encode_pair("image cache image", "render", tiny_vocab, max_len=16)
        desc_tokens, claim_tokens = decode_segments(encoded, tiny_vocab)
        assert desc_tokens == ["image", "cache", "image"]
        assert claim_tokens == ["render"]

    def test_label_is_carried(self, tiny_vocab):
        assert encode_pair("image", "render", tiny_vocab, 8, label=1).label == 1
        assert encode_pair("image", "render", tiny_vocab, 8).label is None

    @settings(max_examples=150, deadline=None)
    @given(
        desc_words=st.lists(st.sampled_from(["image", "cache", "render", "zebra"]), min_size=1, max_size=40),
        claim_words=st.lists(st.sampled_from(["image", "cache", "render", "qux"]), min_size=1, max_size=40),
        max_len=st.sampled_from([5, 8, 16, 64, 128]),
    )
    def test_layout_invariants(self, desc_words, claim_words, max_len):
        vocab = TINY_VOCAB
        encoded = encode_pair(" ".join(desc_words), " ".join(claim_words), vocab, max_len)
        ids = list(encoded.token_ids)
        segments = list(encoded.segment_ids)
        mask = list(encoded.attention_mask)
        assert len(ids) == len(segments) == len(mask) == max_len
        assert ids[0] == vocab.cls_id
        sep_positions = [i for i, t in enumerate(ids) if t == vocab.sep_id]
        assert len(sep_positions) == 2
        first_sep, second_sep = sep_positions
        # Both segments keep at least one token.
        assert first_sep > 1
        assert second_sep > first_sep + 1
        # Padding is exactly the tail after the second separator.
        assert all(t == vocab.pad_id for t in ids[second_sep + 1 :])
        assert all(t != vocab.pad_id for t in ids[: second_sep + 1])
        # Mask marks non-padding, segments flip after the first separator.
        assert mask == [1] * (second_sep + 1) + [0] * (max_len - second_sep - 1)
        expected_segments = (
            [0] * (first_sep + 1)
            + [1] * (second_sep - first_sep)
            + [0] * (max_len - second_sep - 1)
        )
        assert segments == expected_segments


def test_vocab_tokens_from_texts_orders_by_frequency():
    tokens = vocab_tokens_from_texts(["cache cache image", "render image cache"])
    assert tokens[:4] == ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
    assert tokens[4] == "cache"
    assert set(tokens[5:]) == {"image", "render"}
