"""Self-retrieval evaluation and desk-scale experiments.

The evaluation protocol: take each reference patent's abstract as the query
description, rank the independent claims of the whole search pool, and record
where the reference's own first claim lands. A synthetic corpus generator
plants per-patent topic vocabulary so own-claim affinity exists by
construction, which makes the protocol runnable at desk scale.
"""

import dataclasses
import json
import logging
import os
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import (
    Claim,
    PatentDoc,
    NoIndependentClaim,
    UnknownId,
    filter_corpus,
    independent_claims,
    load_corpus,
    split_disjoint,
)
from .errors import PipelineError
from .pairgen import (
    LABEL_MATCHED,
    TrainingPair,
    build_dataset,
    split_validation,
    write_pairs,
)
from .ranker import RankedResult, rank, ranked_to_records, render_table
from .scorer import (
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    BaselineScorer,
    ExternalScorer,
    evaluate_accuracy,
    train_baseline,
)
from .slicer import DEFAULT_MAX_WORDS, DEFAULT_MIN_WORDS, slice_description
from .util import derive_seed, ordered_map

logger = logging.getLogger(__name__)

TOPIC_WORD_FRACTION = 0.7
ABSTRACT_WORDS = 60
CLAIM_WORDS = 50
DEPENDENT_CLAIM_WORDS = 15


class InvalidSpec(PipelineError):
    pass


class ReferenceNotInPool(PipelineError):
    def __init__(self, doc_id: str):
        super().__init__(f"reference {doc_id!r} is not in the search pool")
        self.doc_id = doc_id


class OverlapDetected(PipelineError):
    def __init__(self, ids: Sequence[str]):
        shown = ", ".join(sorted(ids)[:5])
        super().__init__(f"training and search pools overlap: {shown}")
        self.ids = tuple(sorted(ids))


def synth_corpus(
    n_patents: int,
    topic_vocab_size: int = 25,
    shared_vocab_size: int = 60,
    words_per_description: int = 400,
    seed: int = 0,
    threads: int = 1,
) -> list[PatentDoc]:
    """Generate a corpus with planted per-patent topic vocabulary.

    Each patent draws its description, abstract, and first (independent) claim
    mostly from a private topic word set, with the remainder from a shared
    boilerplate set, so a patent's own claim overlaps its description far more
    than any other patent's claim does. Fully deterministic per seed.
    """
    if n_patents < 2:
        raise InvalidSpec(f"need at least 2 patents, got {n_patents}")
    if min(topic_vocab_size, shared_vocab_size, words_per_description) < 1:
        raise InvalidSpec("vocabulary sizes and description length must be >= 1")
    shared_words = [f"shared{index:03d}" for index in range(shared_vocab_size)]

    def one(patent_index: int) -> PatentDoc:
        rng = random.Random(derive_seed(seed, "synth", patent_index))
        topic_words = [
            f"p{patent_index:04d}w{word_index:02d}"
            for word_index in range(topic_vocab_size)
        ]

        def draw(count: int) -> str:
            words = [
                rng.choice(topic_words)
                if rng.random() < TOPIC_WORD_FRACTION
                else rng.choice(shared_words)
                for _ in range(count)
            ]
            return " ".join(words)

        description = draw(words_per_description)
        abstract = draw(ABSTRACT_WORDS)
        first_claim = Claim(
            number=1,
            text="a method comprising " + draw(CLAIM_WORDS),
            is_independent=True,
        )
        dependent_claim = Claim(
            number=2,
            text="the method of claim 1 further comprising "
            + draw(DEPENDENT_CLAIM_WORDS),
            is_independent=False,
        )
        return PatentDoc(
            id=f"SYN{patent_index:04d}B2",
            kind_code="B2",
            language="en",
            classifications=("G06T1/60",),
            abstract=abstract,
            description=description,
            claims=(first_claim, dependent_claim),
        )

    return ordered_map(one, range(n_patents), threads)


def recall_at_k(ranks: Sequence[int], k: int) -> float:
    return sum(1 for value in ranks if value <= k) / len(ranks)


def mean_reciprocal_rank(ranks: Sequence[int]) -> float:
    return sum(1.0 / value for value in ranks) / len(ranks)


@dataclass
class ReferenceResult:
    reference_id: str
    self_rank: Optional[int]
    table: list[RankedResult]


@dataclass
class EvalReport:
    references: list[ReferenceResult]
    recall_at_1: Optional[float]
    recall_at_10: Optional[float]
    mrr: Optional[float]
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "references": [
                {
                    "reference_id": entry.reference_id,
                    "self_rank": entry.self_rank,
                    "table": ranked_to_records(entry.table),
                }
                for entry in self.references
            ],
            "recall_at_1": self.recall_at_1,
            "recall_at_10": self.recall_at_10,
            "mrr": self.mrr,
            "stats": self.stats,
        }

    def render_tables(self) -> str:
        blocks = []
        for index, entry in enumerate(self.references, start=1):
            blocks.append(
                render_table(
                    entry.reference_id,
                    entry.table,
                    header_left=f"Reference patent {index}",
                )
            )
        return "\n\n".join(blocks) + "\n"


def self_retrieval_eval(
    references: Sequence[PatentDoc],
    search_pool: Sequence[PatentDoc],
    scorer,
    top_k: int = 10,
    claim_mode: str = "first_only",
    exclude_self: bool = False,
    threads: int = 1,
) -> EvalReport:
    """Rank the pool against each reference abstract and locate the self-rank.

    Every reference must be a member of the search pool. With exclude_self the
    reference's own claims are removed from its candidate set (the realistic
    usage) and its self-rank is absent.
    """
    pool_ids = {doc.id for doc in search_pool}
    for doc in references:
        if doc.id not in pool_ids:
            raise ReferenceNotInPool(doc.id)

    def evaluate(reference: PatentDoc) -> ReferenceResult:
        candidates = [
            doc
            for doc in search_pool
            if not (exclude_self and doc.id == reference.id)
        ]
        full_ranking = rank(
            reference.abstract,
            candidates,
            scorer,
            top_k=None,
            claim_mode=claim_mode,
            query_id=reference.id,
        )
        self_rank = None
        if not exclude_self:
            own_first = independent_claims(reference, "first_only")[0]
            for result in full_ranking:
                if (
                    result.patent_id == reference.id
                    and result.claim_number == own_first.number
                ):
                    self_rank = result.rank
                    break
        return ReferenceResult(
            reference_id=reference.id,
            self_rank=self_rank,
            table=full_ranking[:top_k],
        )

    results = ordered_map(evaluate, references, threads)
    ranks = [entry.self_rank for entry in results if entry.self_rank is not None]
    return EvalReport(
        references=results,
        recall_at_1=recall_at_k(ranks, 1) if ranks else None,
        recall_at_10=recall_at_k(ranks, 10) if ranks else None,
        mrr=mean_reciprocal_rank(ranks) if ranks else None,
        stats={
            "n_references": len(list(references)),
            "n_search_pool": len(list(search_pool)),
        },
    )


@dataclass
class ExperimentConfig:
    """End-to-end experiment description; exactly one corpus source is set."""

    corpus_path: Optional[str] = None
    synth_patents: Optional[int] = None
    synth_topic_vocab: int = 25
    synth_shared_vocab: int = 60
    synth_desc_words: int = 400
    train_class_prefix: str = ""
    search_class_prefix: str = ""
    languages: tuple[str, ...] = ("en",)
    kinds: tuple[str, ...] = ()
    train_ids: Optional[tuple[str, ...]] = None
    search_ids: Optional[tuple[str, ...]] = None
    search_fraction: float = 0.33
    reference_ids: Optional[tuple[str, ...]] = None
    n_references: int = 5
    min_words: int = DEFAULT_MIN_WORDS
    max_words: int = DEFAULT_MAX_WORDS
    claim_mode: str = "first_only"
    scorer: str = "baseline"
    scorer_cmd: Optional[str] = None
    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    validation: float = 0.1
    top_k: int = 10
    seed: int = 0
    threads: int = 1
    exclude_references: bool = False
    out_dir: Optional[str] = None

    def validate(self) -> None:
        if (self.corpus_path is None) == (self.synth_patents is None):
            raise InvalidSpec("set exactly one of corpus_path and synth_patents")
        if self.scorer not in ("baseline", "external"):
            raise InvalidSpec(f"scorer must be baseline or external, got {self.scorer!r}")
        if self.scorer == "external" and not self.scorer_cmd:
            raise InvalidSpec("external scorer requires scorer_cmd")

    def echo(self) -> dict:
        # out_dir and threads are run-local and never change results, so the
        # reproducibility echo leaves them out.
        resolved = dataclasses.asdict(self)
        resolved.pop("out_dir")
        resolved.pop("threads")
        return resolved


def _select_pools(
    config: ExperimentConfig, docs: list[PatentDoc]
) -> tuple[list[PatentDoc], list[PatentDoc]]:
    train_candidates = filter_corpus(
        docs, config.train_class_prefix, config.languages, config.kinds
    )
    search_candidates = filter_corpus(
        docs, config.search_class_prefix, config.languages, config.kinds
    )
    if config.train_ids is not None or config.search_ids is not None:
        by_id = {doc.id: doc for doc in docs}
        train_ids = list(config.train_ids or [doc.id for doc in train_candidates])
        search_ids = list(config.search_ids or [doc.id for doc in search_candidates])
        for doc_id in train_ids + search_ids:
            if doc_id not in by_id:
                raise UnknownId(doc_id)
        overlap = set(train_ids) & set(search_ids)
        if overlap:
            raise OverlapDetected(sorted(overlap))
        train_pool = [by_id[doc_id] for doc_id in train_ids]
        search_pool = [by_id[doc_id] for doc_id in search_ids]
    elif config.train_class_prefix == config.search_class_prefix:
        train_pool, search_pool = split_disjoint(
            train_candidates, config.search_fraction, derive_seed(config.seed, "pool-split")
        )
    else:
        search_pool = search_candidates
        search_id_set = {doc.id for doc in search_pool}
        train_pool = [doc for doc in train_candidates if doc.id not in search_id_set]
    overlap = {doc.id for doc in train_pool} & {doc.id for doc in search_pool}
    if overlap:
        raise OverlapDetected(sorted(overlap))
    return train_pool, search_pool


def _select_references(
    config: ExperimentConfig, search_pool: list[PatentDoc]
) -> list[PatentDoc]:
    by_id = {doc.id: doc for doc in search_pool}
    if config.reference_ids is not None:
        missing = [doc_id for doc_id in config.reference_ids if doc_id not in by_id]
        if missing:
            raise ReferenceNotInPool(missing[0])
        return [by_id[doc_id] for doc_id in config.reference_ids]
    count = min(config.n_references, len(search_pool))
    rng = random.Random(derive_seed(config.seed, "references"))
    chosen = set(rng.sample([doc.id for doc in search_pool], count))
    return [doc for doc in search_pool if doc.id in chosen]


def _build_training_pairs(
    config: ExperimentConfig, train_pool: list[PatentDoc]
) -> tuple[list[TrainingPair], list[TrainingPair], dict]:
    claim_source = {}
    dropped = []
    for doc in train_pool:
        if not doc.description.split():
            dropped.append((doc.id, "empty description"))
            continue
        try:
            claim_source[doc.id] = independent_claims(doc, config.claim_mode)
        except NoIndependentClaim:
            dropped.append((doc.id, "no independent claim"))
    if dropped:
        logger.warning("dropped %d docs from the training pool", len(dropped))
    usable = [doc for doc in train_pool if doc.id in claim_source]

    def slice_one(doc: PatentDoc):
        return slice_description(doc, config.min_words, config.max_words, config.seed)

    pieces = [
        piece
        for piece_list in ordered_map(slice_one, usable, config.threads)
        for piece in piece_list
    ]
    pairs = build_dataset(pieces, claim_source, config.seed)
    train_pairs, val_pairs = split_validation(pairs, config.validation, config.seed)
    label_counts = {
        "label_1": sum(1 for pair in pairs if pair.label == LABEL_MATCHED),
        "label_0": sum(1 for pair in pairs if pair.label != LABEL_MATCHED),
    }
    stats = {
        "training_docs": len(usable),
        "dropped_training_docs": len(dropped),
        "pieces": len(pieces),
        "pairs_total": len(pairs),
        "pairs_train": len(train_pairs),
        "pairs_validation": len(val_pairs),
        **label_counts,
    }
    return train_pairs, val_pairs, stats


def run_experiment(config: ExperimentConfig) -> EvalReport:
    """Execute the full pipeline: pools, pairs, scorer, self-retrieval, artifacts."""
    config.validate()
    if config.corpus_path is not None:
        docs = load_corpus(config.corpus_path).docs
    else:
        docs = synth_corpus(
            config.synth_patents,
            config.synth_topic_vocab,
            config.synth_shared_vocab,
            config.synth_desc_words,
            seed=config.seed,
            threads=config.threads,
        )
    train_pool, search_pool = _select_pools(config, docs)
    references = _select_references(config, search_pool)
    train_pairs, val_pairs, stats = _build_training_pairs(config, train_pool)

    baseline = None
    if config.scorer == "baseline":
        training = train_baseline(
            train_pairs, config.epochs, config.learning_rate, config.seed
        )
        baseline = training.model
        backend = BaselineScorer(training.model)
        stats["baseline_train_accuracy"] = training.train_accuracy
        stats["baseline_final_loss"] = training.loss_trace[-1]
        stats["baseline_validation_accuracy"] = evaluate_accuracy(
            training.model, val_pairs
        )
        external = None
    else:
        external = ExternalScorer.spawn(config.scorer_cmd)
        backend = external

    try:
        report = self_retrieval_eval(
            references,
            search_pool,
            backend,
            top_k=config.top_k,
            claim_mode=config.claim_mode,
            exclude_self=config.exclude_references,
            threads=1 if external is not None else config.threads,
        )
    finally:
        if external is not None:
            external.close()

    stats.update(report.stats)
    stats["train_pool"] = len(train_pool)
    stats["search_pool"] = len(search_pool)
    stats["reference_ids"] = [doc.id for doc in references]
    report.stats = stats

    if config.out_dir:
        _write_artifacts(config, report, train_pairs, val_pairs, baseline)
    return report


def _write_artifacts(config, report, train_pairs, val_pairs, baseline) -> None:
    os.makedirs(config.out_dir, exist_ok=True)

    def path_of(name: str) -> str:
        return os.path.join(config.out_dir, name)

    write_pairs(path_of("pairs.jsonl"), train_pairs)
    write_pairs(path_of("validation.jsonl"), val_pairs)
    if baseline is not None:
        baseline.save(path_of("model.json"))
    with open(path_of("report.json"), "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, sort_keys=True, indent=2)
        handle.write("\n")
    with open(path_of("tables.txt"), "w", encoding="utf-8") as handle:
        handle.write(report.render_tables())
    with open(path_of("config.json"), "w", encoding="utf-8") as handle:
        json.dump(config.echo(), handle, sort_keys=True, indent=2)
        handle.write("\n")
