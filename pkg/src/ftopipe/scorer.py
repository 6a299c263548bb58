"""Pair scoring backends.

Two backends share one result type: a trainable lexical baseline (logistic
regression over overlap features) and a client for an external neural scorer
speaking a JSON-lines protocol over stdin/stdout. Scores are two logits per
pair; logit_1 is the matched-label score and softmax turns the pair into
probabilities.
"""

import json
import math
import re
import shlex
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence

import numpy as np

from .errors import PipelineError
from .pairgen import LABEL_MATCHED, LABEL_MISMATCHED, TrainingPair

FEATURE_NAMES = (
    "idf_cosine",
    "claim_containment",
    "jaccard",
    "log_length_ratio",
    "overlap_count",
)
MODEL_FILE_VERSION = 1
DEFAULT_EPOCHS = 200
DEFAULT_LEARNING_RATE = 0.5

RESPONSE_KEYS = frozenset({"qid", "cid", "logit_0", "logit_1"})

_WORD_RE = re.compile(r"\w+")

# One scoring request/result: (qid, cid, description text, claim text).
ScoreRequest = tuple[str, str, str, str]


class NonFiniteInput(PipelineError):
    pass


class SingleClassDataset(PipelineError):
    pass


class ProtocolError(PipelineError):
    pass


class MissingResponse(PipelineError):
    def __init__(self, pair_key: tuple[str, str]):
        super().__init__(f"endpoint never answered pair {pair_key}")
        self.pair_key = pair_key


class NonFiniteLogit(PipelineError):
    pass


@dataclass(frozen=True)
class ScoreResult:
    pair_key: tuple[str, str]
    logit_0: float
    logit_1: float
    prob_1: float


def softmax(logits: Sequence[float]) -> tuple[float, float]:
    """Numerically stable two-way softmax (max subtraction before exp)."""
    first, second = float(logits[0]), float(logits[1])
    if not (math.isfinite(first) and math.isfinite(second)):
        raise NonFiniteInput(f"logits must be finite, got ({first}, {second})")
    peak = first if first >= second else second
    exp_first = math.exp(first - peak)
    exp_second = math.exp(second - peak)
    total = exp_first + exp_second
    return exp_first / total, exp_second / total


def text_tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


@dataclass
class IdfTable:
    """Smoothed inverse document frequencies: ln((N + 1) / (df + 1)) + 1."""

    n_docs: int
    df: dict[str, int]

    def weight(self, token: str) -> float:
        return math.log((self.n_docs + 1) / (self.df.get(token, 0) + 1)) + 1.0

    @classmethod
    def from_texts(cls, texts: Sequence[str]) -> "IdfTable":
        df: Counter = Counter()
        for text in texts:
            df.update(set(text_tokens(text)))
        return cls(n_docs=len(texts), df=dict(df))


def extract_features(desc_text: str, claim_text: str, idf: IdfTable) -> np.ndarray:
    """Five lexical features; all overlap features are zero for empty text."""
    desc = text_tokens(desc_text)
    claim = text_tokens(claim_text)
    desc_set = set(desc)
    claim_set = set(claim)
    shared = desc_set & claim_set
    union = desc_set | claim_set

    desc_counts = Counter(desc)
    claim_counts = Counter(claim)
    # Sorted so float accumulation order is stable across interpreter runs.
    dot = sum(
        desc_counts[token] * claim_counts[token] * idf.weight(token) ** 2
        for token in sorted(shared)
    )
    desc_norm = math.sqrt(
        sum((count * idf.weight(token)) ** 2 for token, count in desc_counts.items())
    )
    claim_norm = math.sqrt(
        sum((count * idf.weight(token)) ** 2 for token, count in claim_counts.items())
    )
    cosine = dot / (desc_norm * claim_norm) if desc_norm > 0 and claim_norm > 0 else 0.0
    containment = (
        sum(1 for token in claim if token in desc_set) / len(claim) if claim else 0.0
    )
    jaccard = len(shared) / len(union) if union else 0.0
    # Smoothed so either side may be empty.
    log_ratio = math.log((len(desc) + 1) / (len(claim) + 1))
    overlap = float(len(shared))
    return np.array(
        [cosine, containment, jaccard, log_ratio, overlap], dtype=np.float64
    )


@dataclass
class BaselineModel:
    """Logistic regression over min-max normalized lexical features.

    Normalization constants and the idf table are frozen at training time and
    stored with the weights, so a reloaded model scores unseen pairs
    identically.
    """

    weights: np.ndarray
    bias: float
    feature_min: np.ndarray
    feature_max: np.ndarray
    idf: IdfTable
    feature_names: tuple[str, ...] = FEATURE_NAMES
    version: int = MODEL_FILE_VERSION

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        span = self.feature_max - self.feature_min
        safe_span = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (raw - self.feature_min) / safe_span, 0.0)

    def logit(self, desc_text: str, claim_text: str) -> float:
        features = self.normalize(extract_features(desc_text, claim_text, self.idf))
        return float(features @ self.weights + self.bias)

    def save(self, path: str) -> None:
        payload = {
            "version": self.version,
            "feature_names": list(self.feature_names),
            "weights": [float(value) for value in self.weights],
            "bias": float(self.bias),
            "normalization": {
                "min": [float(value) for value in self.feature_min],
                "max": [float(value) for value in self.feature_max],
            },
            "idf": {"n_docs": self.idf.n_docs, "df": self.idf.df},
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, sort_keys=True)
            handle.write("\n")

    @classmethod
    def load(cls, path: str) -> "BaselineModel":
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
        try:
            if payload["version"] != MODEL_FILE_VERSION:
                raise PipelineError(
                    f"unsupported model file version {payload['version']}"
                )
            return cls(
                weights=np.array(payload["weights"], dtype=np.float64),
                bias=float(payload["bias"]),
                feature_min=np.array(payload["normalization"]["min"], dtype=np.float64),
                feature_max=np.array(payload["normalization"]["max"], dtype=np.float64),
                idf=IdfTable(
                    n_docs=int(payload["idf"]["n_docs"]),
                    df={str(k): int(v) for k, v in payload["idf"]["df"].items()},
                ),
                feature_names=tuple(payload["feature_names"]),
            )
        except KeyError as exc:
            raise PipelineError(f"model file missing field {exc}") from exc


@dataclass
class BaselineTraining:
    model: BaselineModel
    loss_trace: list[float] = field(default_factory=list)
    train_accuracy: float = 0.0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def _cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    clipped = np.clip(probs, 1e-12, 1.0 - 1e-12)
    return float(
        -np.mean(labels * np.log(clipped) + (1.0 - labels) * np.log(1.0 - clipped))
    )


def train_baseline(
    pairs: Sequence[TrainingPair],
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    seed: int = 0,
) -> BaselineTraining:
    """Full-batch gradient descent on cross-entropy from zero-initialized weights.

    Deterministic for a fixed pair sequence; the seed is accepted for
    interface stability but the optimization itself draws no randomness.
    The loss trace holds the loss before each update plus the final loss.
    """
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    labels = np.array([pair.label for pair in pairs], dtype=np.float64)
    if len(set(labels.tolist())) < 2:
        raise SingleClassDataset("training pairs must contain both labels")
    idf = IdfTable.from_texts(
        [pair.description_text for pair in pairs]
        + [pair.claim_text for pair in pairs]
    )
    raw = np.stack(
        [
            extract_features(pair.description_text, pair.claim_text, idf)
            for pair in pairs
        ]
    )
    feature_min = raw.min(axis=0)
    feature_max = raw.max(axis=0)
    span = feature_max - feature_min
    features = np.where(span > 0, raw - feature_min, 0.0) / np.where(span > 0, span, 1.0)

    weights = np.zeros(raw.shape[1], dtype=np.float64)
    bias = 0.0
    trace = []
    for _ in range(epochs):
        probs = _sigmoid(features @ weights + bias)
        trace.append(_cross_entropy(probs, labels))
        gradient = features.T @ (probs - labels) / len(labels)
        weights = weights - learning_rate * gradient
        bias = bias - learning_rate * float(np.mean(probs - labels))
    probs = _sigmoid(features @ weights + bias)
    trace.append(_cross_entropy(probs, labels))
    accuracy = float(np.mean((probs >= 0.5) == (labels == 1.0)))
    model = BaselineModel(
        weights=weights,
        bias=bias,
        feature_min=feature_min,
        feature_max=feature_max,
        idf=idf,
    )
    return BaselineTraining(model=model, loss_trace=trace, train_accuracy=accuracy)


def evaluate_accuracy(model: BaselineModel, pairs: Sequence[TrainingPair]) -> Optional[float]:
    if not pairs:
        return None
    hits = 0
    for pair in pairs:
        logit = model.logit(pair.description_text, pair.claim_text)
        predicted = LABEL_MATCHED if logit >= 0.0 else LABEL_MISMATCHED
        hits += int(predicted == pair.label)
    return hits / len(pairs)


def score_batch_baseline(
    model: BaselineModel, pairs: Sequence[ScoreRequest]
) -> list[ScoreResult]:
    """Score pairs with the baseline; logit_0 is fixed at zero by convention."""
    results = []
    for qid, cid, desc_text, claim_text in pairs:
        logit_1 = model.logit(desc_text, claim_text)
        _, prob_1 = softmax((0.0, logit_1))
        results.append(
            ScoreResult(pair_key=(str(qid), str(cid)), logit_0=0.0, logit_1=logit_1, prob_1=prob_1)
        )
    return results


class BaselineScorer:
    """score_batch facade over a trained baseline model."""

    def __init__(self, model: BaselineModel):
        self.model = model

    def score_batch(self, pairs: Sequence[ScoreRequest]) -> list[ScoreResult]:
        return score_batch_baseline(self.model, pairs)


class ExternalScorer:
    """Client for the JSON-lines scoring protocol.

    Requests are {"qid", "cid", "text_a", "text_b"}, one per line; responses
    are {"qid", "cid", "logit_0", "logit_1"} matched by (qid, cid) and may
    arrive in any order. Wraps either a spawned subprocess or an explicit
    (writer, reader) stream pair.
    """

    def __init__(self, writer: IO[str], reader: IO[str], process: Optional[subprocess.Popen] = None):
        self.writer = writer
        self.reader = reader
        self.process = process

    @classmethod
    def spawn(cls, command) -> "ExternalScorer":
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        process = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )
        return cls(writer=process.stdin, reader=process.stdout, process=process)

    def score_batch(self, pairs: Sequence[ScoreRequest]) -> list[ScoreResult]:
        return score_batch_external(self, pairs)

    def close(self) -> None:
        try:
            self.writer.close()
        except (OSError, ValueError):
            pass
        if self.process is not None:
            self.process.wait()

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def _parse_response(
    line: str, expected: set[tuple[str, str]], answered: dict
) -> ScoreResult:
    text = line.strip()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed response line: {text!r}") from exc
    if not isinstance(payload, dict):
        raise ProtocolError(f"response is not an object: {text!r}")
    if "error" in payload:
        raise ProtocolError(f"endpoint reported an error: {text!r}")
    if set(payload) != RESPONSE_KEYS:
        raise ProtocolError(f"response keys must be exactly {sorted(RESPONSE_KEYS)}: {text!r}")
    qid, cid = payload["qid"], payload["cid"]
    if not isinstance(qid, str) or not isinstance(cid, str):
        raise ProtocolError(f"qid and cid must be strings: {text!r}")
    key = (qid, cid)
    if key not in expected:
        raise ProtocolError(f"response for unknown pair {key}")
    if key in answered:
        raise ProtocolError(f"duplicate response for pair {key}")
    logit_0, logit_1 = payload["logit_0"], payload["logit_1"]
    for value in (logit_0, logit_1):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProtocolError(f"logits must be numbers: {text!r}")
    if not (math.isfinite(logit_0) and math.isfinite(logit_1)):
        raise NonFiniteLogit(f"non-finite logit in response for pair {key}")
    _, prob_1 = softmax((logit_0, logit_1))
    return ScoreResult(
        pair_key=key, logit_0=float(logit_0), logit_1=float(logit_1), prob_1=prob_1
    )


def score_batch_external(
    endpoint: ExternalScorer, pairs: Sequence[ScoreRequest]
) -> list[ScoreResult]:
    """Send one request line per pair and collect all responses.

    Writes happen on a helper thread so a pipelining endpoint cannot deadlock
    the client; results come back in input order regardless of the order the
    endpoint answered in.
    """
    if not pairs:
        return []
    order: list[tuple[str, str]] = []
    expected: set[tuple[str, str]] = set()
    requests = []
    for qid, cid, text_a, text_b in pairs:
        key = (str(qid), str(cid))
        if key in expected:
            raise ValueError(f"duplicate pair key in batch: {key}")
        order.append(key)
        expected.add(key)
        requests.append(
            {"qid": key[0], "cid": key[1], "text_a": text_a, "text_b": text_b}
        )

    def send() -> None:
        try:
            for request in requests:
                endpoint.writer.write(json.dumps(request, ensure_ascii=False))
                endpoint.writer.write("\n")
            endpoint.writer.flush()
        except (BrokenPipeError, OSError, ValueError):
            # The reader side reports unanswered pairs.
            pass

    sender = threading.Thread(target=send, daemon=True)
    sender.start()
    answered: dict[tuple[str, str], ScoreResult] = {}
    while len(answered) < len(order):
        line = endpoint.reader.readline()
        if not line:
            missing = next(key for key in order if key not in answered)
            raise MissingResponse(missing)
        if not line.strip():
            continue
        result = _parse_response(line, expected, answered)
        answered[result.pair_key] = result
    sender.join()
    return [answered[key] for key in order]
