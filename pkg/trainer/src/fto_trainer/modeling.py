"""Model and tokenizer resolution.

Three sources are supported: a local directory produced by an earlier
training run, a ``scratch:<preset>`` spec that initializes an untrained
encoder with a vocabulary built from the training pairs, and a pretrained
checkpoint name fetched from the model hub. Scratch presets exist so the
full train/serve path can run in sealed environments; their weights are
random, so they only become useful after fine-tuning.
"""

import os
import re
from collections import Counter
from typing import Iterable, List, Tuple

import torch
from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

from .config import ModelResolutionError

SPECIAL_TOKENS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

# hidden size, layers, attention heads, intermediate size
SCRATCH_PRESETS = {
    "tiny": (128, 2, 2, 256),
    "small": (256, 4, 4, 1024),
}

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def build_vocab(texts: Iterable[str], min_freq: int = 1, max_size: int = 8000) -> List[str]:
    """Frequency-ranked lowercase word vocabulary, specials first."""
    counts: Counter = Counter()
    for text in texts:
        counts.update(_WORD_RE.findall(text.lower()))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    tokens = [token for token, freq in ranked if freq >= min_freq]
    budget = max_size - len(SPECIAL_TOKENS)
    return SPECIAL_TOKENS + tokens[:budget]


def _init_scratch(
    preset: str, vocab_texts: Iterable[str], out_dir: str, seed: int
) -> Tuple[BertTokenizer, BertForSequenceClassification]:
    if preset not in SCRATCH_PRESETS:
        known = ", ".join(sorted(SCRATCH_PRESETS))
        raise ModelResolutionError(f"unknown scratch preset {preset!r} (known: {known})")
    hidden, layers, heads, intermediate = SCRATCH_PRESETS[preset]
    os.makedirs(out_dir, exist_ok=True)
    vocab_path = os.path.join(out_dir, "vocab.txt")
    vocab = build_vocab(vocab_texts)
    with open(vocab_path, "w", encoding="utf-8") as handle:
        for token in vocab:
            handle.write(token + "\n")
    tokenizer = BertTokenizer(vocab_path, do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden,
        num_hidden_layers=layers,
        num_attention_heads=heads,
        intermediate_size=intermediate,
        max_position_embeddings=512,
        num_labels=2,
    )
    torch.manual_seed(seed)
    model = BertForSequenceClassification(config)
    return tokenizer, model


def resolve_model(
    spec: str, vocab_texts: Iterable[str], out_dir: str, seed: int
) -> Tuple[BertTokenizer, BertForSequenceClassification]:
    """Resolve a model spec into a (tokenizer, model) pair ready to train.

    ``spec`` is a local directory, ``scratch:<preset>``, or a checkpoint
    name for the hub. Hub failures (offline environments, typos) surface
    as ModelResolutionError rather than a raw network traceback.
    """
    if spec.startswith("scratch:"):
        return _init_scratch(spec.split(":", 1)[1], vocab_texts, out_dir, seed)
    if os.path.isdir(spec):
        try:
            tokenizer = BertTokenizer.from_pretrained(spec)
            model = BertForSequenceClassification.from_pretrained(spec, num_labels=2)
        except (OSError, ValueError) as exc:
            raise ModelResolutionError(f"could not load model from {spec!r}: {exc}") from exc
        return tokenizer, model
    # RuntimeError covers the hub client's closed-connection-pool failure
    # seen when DNS resolution fails mid-retry.
    try:
        tokenizer = BertTokenizer.from_pretrained(spec)
        if tokenizer.vocab_size <= len(SPECIAL_TOKENS):
            # Offline mode hands back a specials-only tokenizer instead of
            # raising; treat that as a failed resolution.
            raise OSError(f"hub returned an empty tokenizer for {spec!r}")
        model = BertForSequenceClassification.from_pretrained(spec, num_labels=2)
    except (OSError, ValueError, RuntimeError) as exc:
        raise ModelResolutionError(
            f"could not resolve model {spec!r}; pass a local directory or scratch:<preset> "
            f"when the model hub is unreachable: {exc}"
        ) from exc
    return tokenizer, model


def load_serving_model(model_dir: str) -> Tuple[BertTokenizer, BertForSequenceClassification]:
    """Load a fine-tuned model directory for inference."""
    if not os.path.isdir(model_dir):
        raise ModelResolutionError(f"model directory not found: {model_dir!r}")
    try:
        tokenizer = BertTokenizer.from_pretrained(model_dir)
        model = BertForSequenceClassification.from_pretrained(model_dir)
    except (OSError, ValueError) as exc:
        raise ModelResolutionError(f"could not load model from {model_dir!r}: {exc}") from exc
    model.eval()
    return tokenizer, model
