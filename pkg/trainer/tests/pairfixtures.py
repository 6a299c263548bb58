import json

PAIR_DEFAULTS = {
    "desc_patent_id": "P0",
    "claim_patent_id": "P0",
    "piece_index": 0,
    "claim_number": 1,
}


def pair_row(description: str, claim: str, label, **overrides) -> dict:
    row = dict(PAIR_DEFAULTS)
    row.update(description=description, claim=claim, label=label)
    row.update(overrides)
    return row


def write_pair_file(path, rows) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")
    return str(path)


def toy_rows(n_topics: int = 4, words_per_text: int = 8):
    """Balanced separable pairs: positives share a topic vocabulary."""
    rows = []
    for topic in range(n_topics):
        own = " ".join(f"t{topic}w{i}" for i in range(words_per_text))
        other = " ".join(f"x{topic}w{i}" for i in range(words_per_text))
        rows.append(pair_row(own, own, 1, desc_patent_id=f"P{topic}"))
        rows.append(
            pair_row(own, other, 0, desc_patent_id=f"P{topic}", claim_patent_id=f"Q{topic}")
        )
    return rows
