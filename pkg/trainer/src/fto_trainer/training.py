"""Fine-tuning loop for sequence-pair classification."""

import json
import os
import random
from typing import Dict, List, Optional

import torch
import transformers.utils.logging
from torch.optim import AdamW
from transformers import (
    BertForSequenceClassification,
    BertTokenizer,
    get_linear_schedule_with_warmup,
)

from .config import FinetuneConfig
from .data import PairExample, read_pairs
from .modeling import resolve_model

METRICS_FILENAME = "metrics.json"


def _encode_batch(
    tokenizer: BertTokenizer, batch: List[PairExample], max_len: int
) -> Dict[str, torch.Tensor]:
    encoded = tokenizer(
        [example.text_a for example in batch],
        [example.text_b for example in batch],
        max_length=max_len,
        padding="max_length",
        truncation="longest_first",
        return_tensors="pt",
    )
    encoded["labels"] = torch.tensor([example.label for example in batch], dtype=torch.long)
    return encoded


def _evaluate_accuracy(
    model: BertForSequenceClassification,
    tokenizer: BertTokenizer,
    examples: List[PairExample],
    max_len: int,
    batch_size: int,
) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(examples), batch_size):
            batch = examples[start : start + batch_size]
            encoded = _encode_batch(tokenizer, batch, max_len)
            labels = encoded.pop("labels")
            logits = model(**encoded).logits
            correct += int((logits.argmax(dim=-1) == labels).sum().item())
    return correct / len(examples)


def train_finetune(config: FinetuneConfig) -> Dict[str, object]:
    """Fine-tune an encoder on labeled pairs and save it with its metrics.

    Writes the model, its tokenizer, and a metrics file into
    ``config.out_dir``; the metrics carry per-epoch mean training loss,
    validation accuracy per epoch when a validation file is given, final
    training accuracy, and the max_len the model was trained with (which
    the serving side picks up as its default).
    """
    config.validate()
    # Progress bars would interleave with the metrics line, and loading a
    # masked-LM encoder for classification always warns about the fresh head.
    transformers.utils.logging.disable_progress_bar()
    transformers.utils.logging.set_verbosity_error()
    train_examples = read_pairs(config.pairs_path)
    validation_examples: Optional[List[PairExample]] = None
    if config.validation_path is not None:
        validation_examples = read_pairs(config.validation_path)

    torch.manual_seed(config.seed)
    vocab_texts = [example.text_a for example in train_examples] + [
        example.text_b for example in train_examples
    ]
    tokenizer, model = resolve_model(config.model, vocab_texts, config.out_dir, config.seed)
    model.train()
    optimizer = AdamW(model.parameters(), lr=config.learning_rate)
    batches_per_epoch = -(-len(train_examples) // config.batch_size)
    total_steps = batches_per_epoch * config.epochs
    # Linear warmup over the first tenth of training, then linear decay.
    scheduler = get_linear_schedule_with_warmup(
        optimizer, num_warmup_steps=total_steps // 10, num_training_steps=total_steps
    )

    order = list(range(len(train_examples)))
    shuffler = random.Random(config.seed)
    epoch_losses: List[float] = []
    validation_accuracies: List[float] = []
    for _epoch in range(config.epochs):
        shuffler.shuffle(order)
        model.train()
        total_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_examples[i] for i in order[start : start + config.batch_size]]
            encoded = _encode_batch(tokenizer, batch, config.max_len)
            optimizer.zero_grad()
            output = model(**encoded)
            output.loss.backward()
            optimizer.step()
            scheduler.step()
            total_loss += output.loss.item()
            n_batches += 1
        epoch_losses.append(total_loss / n_batches)
        if validation_examples is not None:
            validation_accuracies.append(
                _evaluate_accuracy(
                    model, tokenizer, validation_examples, config.max_len, config.batch_size
                )
            )

    train_accuracy = _evaluate_accuracy(
        model, tokenizer, train_examples, config.max_len, config.batch_size
    )

    os.makedirs(config.out_dir, exist_ok=True)
    model.save_pretrained(config.out_dir)
    tokenizer.save_pretrained(config.out_dir)
    metrics: Dict[str, object] = {
        "epochs": config.epochs,
        "max_len": config.max_len,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "n_train_pairs": len(train_examples),
        "epoch_losses": epoch_losses,
        "train_accuracy": train_accuracy,
    }
    if validation_examples is not None:
        metrics["n_validation_pairs"] = len(validation_examples)
        metrics["validation_accuracies"] = validation_accuracies
    with open(os.path.join(config.out_dir, METRICS_FILENAME), "w", encoding="utf-8") as handle:
        json.dump(metrics, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return metrics
