"""Fine-tuning configuration and the trainer's error family."""

from dataclasses import dataclass
from typing import Optional

# The position-embedding table of the uncased base encoder caps inputs at 512.
MAX_MODEL_LEN = 512
DEFAULT_MAX_LEN = 500
DEFAULT_EPOCHS = 2
DEFAULT_LEARNING_RATE = 2e-5
DEFAULT_BATCH_SIZE = 8
DEFAULT_MODEL = "scratch:tiny"


class TrainerError(Exception):
    """Base for all data and configuration errors in this package."""


class SchemaError(TrainerError):
    pass


class InvalidConfig(TrainerError):
    pass


class ModelResolutionError(TrainerError):
    pass


@dataclass
class FinetuneConfig:
    pairs_path: str
    out_dir: str
    validation_path: Optional[str] = None
    model: str = DEFAULT_MODEL
    max_len: int = DEFAULT_MAX_LEN
    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = 0

    def validate(self) -> None:
        if not (8 <= self.max_len <= MAX_MODEL_LEN):
            raise InvalidConfig(
                f"max_len must be in [8, {MAX_MODEL_LEN}], got {self.max_len}"
            )
        if self.epochs < 1:
            raise InvalidConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise InvalidConfig(f"learning_rate must be > 0, got {self.learning_rate}")
