"""Masked-LM pretraining for environments without a reachable model hub.

Fine-tuning presupposes a pretrained masked-LM encoder; when no checkpoint
can be downloaded, this module manufactures one from the texts of a pair
file. Labels are never read: pretraining sees raw description pieces and
claims only, so a later fine-tune remains the first exposure to the task.
"""

import json
import os
import random
from dataclasses import dataclass
from typing import Dict, List

import torch
import transformers.utils.logging
from torch.optim import AdamW
from transformers import (
    BertConfig,
    BertForMaskedLM,
    BertTokenizer,
    DataCollatorForLanguageModeling,
)

from .config import DEFAULT_MAX_LEN, MAX_MODEL_LEN, InvalidConfig, ModelResolutionError
from .data import read_pairs
from .modeling import SCRATCH_PRESETS, build_vocab

MLM_PROBABILITY = 0.15
DEFAULT_PRETRAIN_EPOCHS = 30
DEFAULT_PRETRAIN_LEARNING_RATE = 1e-3
DEFAULT_PRETRAIN_BATCH_SIZE = 16
PRETRAIN_METRICS_FILENAME = "pretrain_metrics.json"


@dataclass
class PretrainConfig:
    pairs_path: str
    out_dir: str
    preset: str = "tiny"
    max_len: int = DEFAULT_MAX_LEN
    epochs: int = DEFAULT_PRETRAIN_EPOCHS
    learning_rate: float = DEFAULT_PRETRAIN_LEARNING_RATE
    batch_size: int = DEFAULT_PRETRAIN_BATCH_SIZE
    seed: int = 0

    def validate(self) -> None:
        if self.preset not in SCRATCH_PRESETS:
            known = ", ".join(sorted(SCRATCH_PRESETS))
            raise ModelResolutionError(f"unknown preset {self.preset!r} (known: {known})")
        if not (8 <= self.max_len <= MAX_MODEL_LEN):
            raise InvalidConfig(
                f"max_len must be in [8, {MAX_MODEL_LEN}], got {self.max_len}"
            )
        if self.epochs < 1:
            raise InvalidConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidConfig(f"batch_size must be >= 1, got {self.batch_size}")


def unique_texts(pairs_path: str) -> List[str]:
    """Every distinct description piece and claim, in first-seen order."""
    texts: List[str] = []
    seen = set()
    for example in read_pairs(pairs_path):
        for text in (example.text_a, example.text_b):
            if text not in seen:
                seen.add(text)
                texts.append(text)
    return texts


def pretrain_mlm(config: PretrainConfig) -> Dict[str, object]:
    """Train a masked-LM encoder from scratch on pair-file texts.

    Writes the encoder, its tokenizer, and a metrics file with per-epoch
    mean masked-LM loss into ``config.out_dir``. The resulting directory
    is a valid ``--model`` argument for fine-tuning.
    """
    config.validate()
    transformers.utils.logging.disable_progress_bar()
    transformers.utils.logging.set_verbosity_error()
    texts = unique_texts(config.pairs_path)

    os.makedirs(config.out_dir, exist_ok=True)
    vocab = build_vocab(texts)
    vocab_path = os.path.join(config.out_dir, "vocab.txt")
    with open(vocab_path, "w", encoding="utf-8") as handle:
        for token in vocab:
            handle.write(token + "\n")
    tokenizer = BertTokenizer(vocab_path, do_lower_case=True)

    hidden, layers, heads, intermediate = SCRATCH_PRESETS[config.preset]
    model_config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden,
        num_hidden_layers=layers,
        num_attention_heads=heads,
        intermediate_size=intermediate,
        max_position_embeddings=512,
    )
    torch.manual_seed(config.seed)
    model = BertForMaskedLM(model_config)
    model.train()
    collator = DataCollatorForLanguageModeling(
        tokenizer=tokenizer, mlm_probability=MLM_PROBABILITY
    )
    optimizer = AdamW(model.parameters(), lr=config.learning_rate)

    order = list(range(len(texts)))
    shuffler = random.Random(config.seed)
    epoch_losses: List[float] = []
    for _epoch in range(config.epochs):
        shuffler.shuffle(order)
        total_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [texts[i] for i in order[start : start + config.batch_size]]
            # Dynamic padding: masking cost scales with real text length,
            # not with the truncation cap.
            encoded = tokenizer(batch, max_length=config.max_len, padding=True, truncation=True)
            features = [
                {key: encoded[key][i] for key in ("input_ids", "attention_mask", "token_type_ids")}
                for i in range(len(batch))
            ]
            inputs = collator(features)
            optimizer.zero_grad()
            output = model(**inputs)
            output.loss.backward()
            optimizer.step()
            total_loss += output.loss.item()
            n_batches += 1
        epoch_losses.append(total_loss / n_batches)

    model.save_pretrained(config.out_dir)
    tokenizer.save_pretrained(config.out_dir)
    metrics: Dict[str, object] = {
        "preset": config.preset,
        "vocab_size": len(vocab),
        "n_texts": len(texts),
        "max_len": config.max_len,
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "epoch_losses": epoch_losses,
    }
    path = os.path.join(config.out_dir, PRETRAIN_METRICS_FILENAME)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(metrics, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return metrics
