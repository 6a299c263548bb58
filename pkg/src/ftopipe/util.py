"""Shared plumbing: seed derivation, JSON-lines I/O, order-preserving parallel map."""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Sequence


def derive_seed(*parts: Any) -> int:
    """Stable 64-bit child seed from heterogeneous parts.

    Uses blake2b rather than hash() so results do not depend on
    PYTHONHASHSEED, the platform, or the process.
    """
    digest = hashlib.blake2b(digest_size=8)
    for part in parts:
        digest.update(str(part).encode("utf-8"))
        digest.update(b"\x1f")
    return int.from_bytes(digest.digest(), "big")


def write_jsonl(path: str, records: Iterable[dict]) -> int:
    """Write records as sorted-key JSON lines; returns the record count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def read_jsonl(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def ordered_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map fn over items preserving order, optionally on a thread pool.

    Callers guarantee fn is pure per item (seeded via derive_seed), so the
    result is identical for any thread count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
