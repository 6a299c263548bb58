#!/usr/bin/env python3
"""Build a one-token-per-line vocabulary file from a pair dataset.

The vocabulary starts with the special tokens ([PAD], [UNK], [CLS], [SEP])
and continues with corpus words by descending frequency. Useful for
`ftopipe encode` and for training an encoder from scratch when no pretrained
vocabulary is available.
"""

import argparse
import sys

from ftopipe.encoder import save_vocabulary, vocab_tokens_from_texts
from ftopipe.pairgen import read_pairs


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", required=True, help="pair JSON-lines file")
    parser.add_argument("--out", required=True, help="vocabulary output path")
    parser.add_argument(
        "--min-freq", type=int, default=1, help="drop words seen fewer times"
    )
    parser.add_argument(
        "--max-size", type=int, default=None, help="cap on vocabulary size"
    )
    args = parser.parse_args()

    pairs = read_pairs(args.pairs)
    texts = [pair.description_text for pair in pairs] + [
        pair.claim_text for pair in pairs
    ]
    tokens = vocab_tokens_from_texts(texts, min_freq=args.min_freq, max_size=args.max_size)
    save_vocabulary(args.out, tokens)
    print(f"tokens={len(tokens)} out={args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
