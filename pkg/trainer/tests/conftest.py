import sys

import pytest

from fto_trainer.config import FinetuneConfig
from fto_trainer.training import train_finetune
from pairfixtures import toy_rows, write_pair_file


@pytest.fixture(scope="session")
def micro_model(tmp_path_factory):
    """A minimal trained model directory shared by serving tests."""
    root = tmp_path_factory.mktemp("micro_model")
    pairs = write_pair_file(root / "pairs.jsonl", toy_rows())
    out = str(root / "model")
    train_finetune(
        FinetuneConfig(
            pairs_path=pairs,
            out_dir=out,
            model="scratch:tiny",
            max_len=32,
            epochs=1,
            learning_rate=1e-4,
            batch_size=4,
            seed=0,
        )
    )
    return out


def pytest_runtest_logreport(report):
    """Print one pass/fail line per acceptance criterion."""
    module = report.nodeid.split("::")[0].rsplit("/", 1)[-1]
    if report.when != "call" or module != "test_acceptance_trainer.py":
        return
    status = "PASS" if report.passed else ("FAIL" if report.failed else "SKIP")
    name = report.nodeid.split("::")[-1]
    print(f"[ACCEPTANCE] {status} {name}", file=sys.stderr)
