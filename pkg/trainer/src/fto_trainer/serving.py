"""Line-oriented scoring service over the pair-classification wire protocol.

Requests arrive one JSON object per line with keys qid, cid, text_a, and
text_b; each gets a response line carrying the same qid and cid plus the
two raw classifier logits. A malformed request produces an error line and
the loop keeps reading, so one bad record cannot take down a long batch.
"""

import json
import os
import sys
from typing import IO, Optional

import torch
import transformers.utils.logging

from .config import DEFAULT_MAX_LEN, MAX_MODEL_LEN, InvalidConfig
from .modeling import load_serving_model
from .training import METRICS_FILENAME

REQUEST_KEYS = frozenset({"qid", "cid", "text_a", "text_b"})


def default_max_len(model_dir: str) -> int:
    """The max_len the model was trained with, when its metrics are present."""
    path = os.path.join(model_dir, METRICS_FILENAME)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            metrics = json.load(handle)
        return int(metrics["max_len"])
    except (OSError, ValueError, KeyError, TypeError):
        return DEFAULT_MAX_LEN


def _parse_request(line: str) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"not valid JSON: {exc}")
    if not isinstance(record, dict):
        raise ValueError("request must be a JSON object")
    missing = REQUEST_KEYS - record.keys()
    if missing:
        raise ValueError(f"missing keys: {', '.join(sorted(missing))}")
    for key in ("text_a", "text_b"):
        if not isinstance(record[key], str):
            raise ValueError(f"{key} must be a string")
    return record


def serve_scores(
    model_dir: str,
    max_len: Optional[int] = None,
    reader: Optional[IO[str]] = None,
    writer: Optional[IO[str]] = None,
) -> int:
    """Score requests from ``reader`` until EOF, one response line each.

    Returns the number of successfully scored requests. Requests are
    scored one at a time: batching changes float accumulation inside the
    encoder enough to perturb logits, and the protocol promises that
    repeating a request yields the identical response.
    """
    if reader is None:
        reader = sys.stdin
    if writer is None:
        writer = sys.stdout
    if max_len is None:
        max_len = default_max_len(model_dir)
    if not (8 <= max_len <= MAX_MODEL_LEN):
        raise InvalidConfig(f"max_len must be in [8, {MAX_MODEL_LEN}], got {max_len}")

    # Single-threaded math keeps logits identical for repeated requests;
    # anything on stdout other than response lines would corrupt the protocol.
    torch.set_num_threads(1)
    transformers.utils.logging.disable_progress_bar()
    transformers.utils.logging.set_verbosity_error()
    tokenizer, model = load_serving_model(model_dir)
    model.eval()

    scored = 0
    for line in reader:
        line = line.strip()
        if not line:
            continue
        try:
            request = _parse_request(line)
            encoded = tokenizer(
                request["text_a"],
                request["text_b"],
                max_length=max_len,
                padding="max_length",
                truncation="longest_first",
                return_tensors="pt",
            )
            with torch.no_grad():
                logits = model(**encoded).logits[0]
            response = {
                "qid": request["qid"],
                "cid": request["cid"],
                "logit_0": float(logits[0].item()),
                "logit_1": float(logits[1].item()),
            }
        except ValueError as exc:
            writer.write(json.dumps({"error": str(exc)}) + "\n")
            writer.flush()
            continue
        writer.write(json.dumps(response) + "\n")
        writer.flush()
        scored += 1
    return scored
