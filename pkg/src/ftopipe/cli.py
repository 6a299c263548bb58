"""Command-line interface for the pipeline.

Exit codes: 0 success, 1 usage error (bad flags, unknown subcommand), 2 data
error (malformed corpus, protocol violations, invalid configuration values).
"""

import argparse
import json
import logging
import os
import re
import sys

from . import __version__
from .corpus import load_corpus, write_corpus, independent_claims, NoIndependentClaim
from .encoder import DEFAULT_MAX_LEN, encode_pair, encoded_to_record, load_vocabulary
from .errors import PipelineError
from .evalharness import ExperimentConfig, run_experiment, synth_corpus
from .pairgen import (
    build_dataset,
    read_pairs,
    split_validation,
    write_pairs,
)
from .ranker import rank, ranked_to_records, render_table
from .scorer import (
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    BaselineModel,
    BaselineScorer,
    ExternalScorer,
    train_baseline,
)
from .slicer import DEFAULT_MAX_WORDS, DEFAULT_MIN_WORDS, slice_corpus, write_pieces
from .util import write_jsonl

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

THREADS_ENV_VAR = "FTOPIPE_THREADS"

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this pipeline reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size_or_fraction(text: str):
    """Parse an absolute count ("250") or a fraction ("0.1")."""
    if re.fullmatch(r"\d+", text):
        return int(text)
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a count or fraction, got {text!r}") from exc


def _id_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _resolve_threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    env_value = os.environ.get(THREADS_ENV_VAR)
    if env_value:
        try:
            return int(env_value)
        except ValueError:
            raise PipelineError(
                f"{THREADS_ENV_VAR} must be an integer, got {env_value!r}"
            ) from None
    return 1


def _load_config_file(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise PipelineError("config file must hold a JSON object")
    return data


def _merged(args, key: str, default):
    """Explicit flags win over the config file, which wins over defaults."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    config = getattr(args, "_config_data", {})
    if key in config:
        return config[key]
    return default


def _add_common(parser, threads: bool = True) -> None:
    parser.add_argument(
        "--config",
        metavar="FILE",
        help="JSON config file; explicit flags override its values",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="random seed (default: 0)"
    )
    if threads:
        parser.add_argument(
            "--threads",
            type=int,
            default=None,
            help=f"worker threads; outputs never depend on this "
            f"(default: ${THREADS_ENV_VAR} or 1)",
        )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="increase log verbosity (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="ftopipe",
        description="Freedom-to-operate patent analysis pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"ftopipe {__version__}")
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=_ArgumentParser
    )

    ingest = commands.add_parser(
        "ingest", help="validate a JSON-lines corpus and print counts"
    )
    ingest.add_argument("--corpus", required=True, help="corpus JSON-lines file")
    ingest.add_argument(
        "--strict",
        action="store_true",
        help="fail on the first invalid record instead of skipping it",
    )
    _add_common(ingest, threads=False)
    ingest.set_defaults(func=_cmd_ingest)

    slice_cmd = commands.add_parser(
        "slice", help="slice descriptions into word pieces"
    )
    slice_cmd.add_argument("--corpus", required=True, help="corpus JSON-lines file")
    slice_cmd.add_argument("--out", required=True, help="pieces JSON-lines output")
    slice_cmd.add_argument(
        "--min-words", type=int, default=None,
        help=f"minimum piece length in words (default: {DEFAULT_MIN_WORDS})",
    )
    slice_cmd.add_argument(
        "--max-words", type=int, default=None,
        help=f"maximum piece length in words (default: {DEFAULT_MAX_WORDS})",
    )
    _add_common(slice_cmd)
    slice_cmd.set_defaults(func=_cmd_slice)

    pairs_cmd = commands.add_parser(
        "pairs", help="build the balanced labeled pair dataset"
    )
    pairs_cmd.add_argument("--corpus", required=True, help="corpus JSON-lines file")
    pairs_cmd.add_argument("--out", required=True, help="pair JSON-lines output")
    pairs_cmd.add_argument(
        "--min-words", type=int, default=None,
        help=f"minimum piece length in words (default: {DEFAULT_MIN_WORDS})",
    )
    pairs_cmd.add_argument(
        "--max-words", type=int, default=None,
        help=f"maximum piece length in words (default: {DEFAULT_MAX_WORDS})",
    )
    pairs_cmd.add_argument(
        "--claim-mode", choices=("first_only", "all"), default=None,
        help="which independent claims pair with pieces (default: first_only)",
    )
    pairs_cmd.add_argument(
        "--validation", type=_size_or_fraction, default=None,
        help="held-out pair count or fraction (default: 0, no split)",
    )
    pairs_cmd.add_argument(
        "--validation-out", default=None,
        help="held-out pair JSON-lines output (required with --validation)",
    )
    _add_common(pairs_cmd)
    pairs_cmd.set_defaults(func=_cmd_pairs)

    encode = commands.add_parser(
        "encode", help="encode a pair file into fixed-length id sequences"
    )
    encode.add_argument("--pairs", required=True, help="pair JSON-lines file")
    encode.add_argument("--vocab", required=True, help="one-token-per-line vocabulary")
    encode.add_argument("--out", required=True, help="encoded JSON-lines output")
    encode.add_argument(
        "--max-len", type=int, default=None,
        help=f"encoded sequence length (default: {DEFAULT_MAX_LEN})",
    )
    _add_common(encode, threads=False)
    encode.set_defaults(func=_cmd_encode)

    train = commands.add_parser(
        "train-baseline", help="fit the lexical baseline scorer on a pair file"
    )
    train.add_argument("--pairs", required=True, help="pair JSON-lines file")
    train.add_argument("--model-out", required=True, help="model JSON output")
    train.add_argument(
        "--epochs", type=int, default=None,
        help=f"gradient descent epochs (default: {DEFAULT_EPOCHS})",
    )
    train.add_argument(
        "--lr", type=float, default=None,
        help=f"learning rate (default: {DEFAULT_LEARNING_RATE})",
    )
    _add_common(train, threads=False)
    train.set_defaults(func=_cmd_train_baseline)

    rank_cmd = commands.add_parser(
        "rank", help="rank a candidate pool against a query description"
    )
    rank_cmd.add_argument(
        "--query", required=True, help="file holding the query description text"
    )
    rank_cmd.add_argument("--pool", required=True, help="candidate corpus JSON-lines file")
    rank_cmd.add_argument(
        "--scorer", choices=("baseline", "external"), default=None,
        help="scoring backend (default: baseline)",
    )
    rank_cmd.add_argument("--model", default=None, help="baseline model JSON file")
    rank_cmd.add_argument(
        "--scorer-cmd", default=None,
        help="external scorer command speaking the JSON-lines protocol",
    )
    rank_cmd.add_argument(
        "--top-k", type=int, default=None, help="rows to print (default: 10)"
    )
    rank_cmd.add_argument(
        "--claim-mode", choices=("first_only", "all"), default=None,
        help="which independent claims are candidates (default: first_only)",
    )
    rank_cmd.add_argument(
        "--query-id", default=None, help="query identifier (default: query)"
    )
    rank_cmd.add_argument(
        "--jsonl-out", default=None, help="also write machine-readable rows here"
    )
    _add_common(rank_cmd, threads=False)
    rank_cmd.set_defaults(func=_cmd_rank)

    eval_cmd = commands.add_parser(
        "eval", help="run a self-retrieval experiment end to end"
    )
    eval_cmd.add_argument("--corpus", default=None, help="corpus JSON-lines file")
    eval_cmd.add_argument(
        "--synth-patents", type=int, default=None,
        help="generate a synthetic corpus of this many patents instead",
    )
    eval_cmd.add_argument("--out-dir", required=True, help="artifact directory")
    eval_cmd.add_argument(
        "--train-class", default=None, help="training pool classification prefix"
    )
    eval_cmd.add_argument(
        "--search-class", default=None, help="search pool classification prefix"
    )
    eval_cmd.add_argument(
        "--train-ids", type=_id_list, default=None,
        help="comma-separated explicit training pool ids",
    )
    eval_cmd.add_argument(
        "--search-ids", type=_id_list, default=None,
        help="comma-separated explicit search pool ids",
    )
    eval_cmd.add_argument(
        "--search-fraction", type=float, default=None,
        help="search pool fraction when pools are split from one set (default: 0.33)",
    )
    eval_cmd.add_argument(
        "--reference-ids", type=_id_list, default=None,
        help="comma-separated reference patent ids (default: sampled)",
    )
    eval_cmd.add_argument(
        "--n-references", type=int, default=None,
        help="references to sample when none are named (default: 5)",
    )
    eval_cmd.add_argument(
        "--min-words", type=int, default=None,
        help=f"minimum piece length in words (default: {DEFAULT_MIN_WORDS})",
    )
    eval_cmd.add_argument(
        "--max-words", type=int, default=None,
        help=f"maximum piece length in words (default: {DEFAULT_MAX_WORDS})",
    )
    eval_cmd.add_argument(
        "--claim-mode", choices=("first_only", "all"), default=None,
        help="independent claim selection (default: first_only)",
    )
    eval_cmd.add_argument(
        "--scorer", choices=("baseline", "external"), default=None,
        help="scoring backend (default: baseline)",
    )
    eval_cmd.add_argument(
        "--scorer-cmd", default=None,
        help="external scorer command speaking the JSON-lines protocol",
    )
    eval_cmd.add_argument(
        "--epochs", type=int, default=None,
        help=f"baseline training epochs (default: {DEFAULT_EPOCHS})",
    )
    eval_cmd.add_argument(
        "--lr", type=float, default=None,
        help=f"baseline learning rate (default: {DEFAULT_LEARNING_RATE})",
    )
    eval_cmd.add_argument(
        "--validation", type=_size_or_fraction, default=None,
        help="held-out pair count or fraction (default: 0.1)",
    )
    eval_cmd.add_argument(
        "--top-k", type=int, default=None, help="table rows per reference (default: 10)"
    )
    eval_cmd.add_argument(
        "--exclude-references", action="store_true", default=None,
        help="remove each reference's own claims from its candidate set",
    )
    _add_common(eval_cmd)
    eval_cmd.set_defaults(func=_cmd_eval)

    synth = commands.add_parser(
        "synth", help="generate a synthetic corpus with planted topic affinity"
    )
    synth.add_argument(
        "--n-patents", type=int, required=True, help="number of patents to generate"
    )
    synth.add_argument("--out", required=True, help="corpus JSON-lines output")
    synth.add_argument(
        "--topic-vocab", type=int, default=None,
        help="private topic words per patent (default: 25)",
    )
    synth.add_argument(
        "--shared-vocab", type=int, default=None,
        help="shared boilerplate vocabulary size (default: 60)",
    )
    synth.add_argument(
        "--desc-words", type=int, default=None,
        help="words per description (default: 400)",
    )
    _add_common(synth)
    synth.set_defaults(func=_cmd_synth)

    return parser


def _cmd_ingest(args) -> int:
    result = load_corpus(args.corpus, strict=bool(args.strict))
    for line_no, reason in result.skipped[:10]:
        print(f"skipped line {line_no}: {reason}", file=sys.stderr)
    print(
        f"accepted={len(result.docs)} skipped={len(result.skipped)} "
        f"total={result.total_lines}"
    )
    return EXIT_OK


def _cmd_slice(args) -> int:
    seed = _merged(args, "seed", 0)
    docs = load_corpus(args.corpus).docs
    pieces, skipped = slice_corpus(
        docs,
        min_words=_merged(args, "min_words", DEFAULT_MIN_WORDS),
        max_words=_merged(args, "max_words", DEFAULT_MAX_WORDS),
        seed=seed,
        threads=_resolve_threads(args),
    )
    write_pieces(args.out, pieces)
    print(f"docs={len(docs)} sliced={len(docs) - len(skipped)} pieces={len(pieces)}")
    return EXIT_OK


def _training_claim_source(docs, claim_mode):
    claim_source = {}
    kept = []
    dropped = 0
    for doc in docs:
        if not doc.description.split():
            dropped += 1
            continue
        try:
            claim_source[doc.id] = independent_claims(doc, claim_mode)
        except NoIndependentClaim:
            dropped += 1
            continue
        kept.append(doc)
    if dropped:
        logger.warning("dropped %d docs unusable for training", dropped)
    return kept, claim_source


def _cmd_pairs(args) -> int:
    seed = _merged(args, "seed", 0)
    claim_mode = _merged(args, "claim_mode", "first_only")
    validation = _merged(args, "validation", 0)
    docs = load_corpus(args.corpus).docs
    kept, claim_source = _training_claim_source(docs, claim_mode)
    pieces, _ = slice_corpus(
        kept,
        min_words=_merged(args, "min_words", DEFAULT_MIN_WORDS),
        max_words=_merged(args, "max_words", DEFAULT_MAX_WORDS),
        seed=seed,
        threads=_resolve_threads(args),
    )
    pairs = build_dataset(pieces, claim_source, seed)
    held_out = []
    if validation:
        if not args.validation_out:
            raise PipelineError("--validation requires --validation-out")
        pairs, held_out = split_validation(pairs, validation, seed)
        write_pairs(args.validation_out, held_out)
    write_pairs(args.out, pairs)
    total = len(pairs) + len(held_out)
    label_1 = sum(pair.label == 1 for pair in pairs) + sum(
        pair.label == 1 for pair in held_out
    )
    print(
        f"pairs={total} label_1={label_1} label_0={total - label_1} "
        f"train={len(pairs)} validation={len(held_out)}"
    )
    return EXIT_OK


def _cmd_encode(args) -> int:
    vocab = load_vocabulary(args.vocab)
    max_len = _merged(args, "max_len", DEFAULT_MAX_LEN)
    pairs = read_pairs(args.pairs)
    records = (
        encoded_to_record(
            encode_pair(
                pair.description_text,
                pair.claim_text,
                vocab,
                max_len=max_len,
                label=pair.label,
            )
        )
        for pair in pairs
    )
    count = write_jsonl(args.out, records)
    print(f"encoded={count} max_len={max_len}")
    return EXIT_OK


def _cmd_train_baseline(args) -> int:
    pairs = read_pairs(args.pairs)
    training = train_baseline(
        pairs,
        epochs=_merged(args, "epochs", DEFAULT_EPOCHS),
        learning_rate=_merged(args, "lr", DEFAULT_LEARNING_RATE),
        seed=_merged(args, "seed", 0),
    )
    training.model.save(args.model_out)
    print(
        f"pairs={len(pairs)} final_loss={training.loss_trace[-1]:.6f} "
        f"train_accuracy={training.train_accuracy:.4f}"
    )
    return EXIT_OK


def _cmd_rank(args) -> int:
    scorer_kind = _merged(args, "scorer", "baseline")
    with open(args.query, encoding="utf-8") as handle:
        query_text = handle.read().strip()
    pool = load_corpus(args.pool).docs
    external = None
    if scorer_kind == "baseline":
        if not args.model:
            raise PipelineError("baseline scorer requires --model")
        backend = BaselineScorer(BaselineModel.load(args.model))
    else:
        if not args.scorer_cmd:
            raise PipelineError("external scorer requires --scorer-cmd")
        external = ExternalScorer.spawn(args.scorer_cmd)
        backend = external
    try:
        results = rank(
            query_text,
            pool,
            backend,
            top_k=_merged(args, "top_k", 10),
            claim_mode=_merged(args, "claim_mode", "first_only"),
            query_id=_merged(args, "query_id", "query"),
        )
    finally:
        if external is not None:
            external.close()
    print(render_table(_merged(args, "query_id", "query"), results))
    if args.jsonl_out:
        write_jsonl(args.jsonl_out, ranked_to_records(results))
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = ExperimentConfig(
        corpus_path=_merged(args, "corpus", None),
        synth_patents=_merged(args, "synth_patents", None),
        train_class_prefix=_merged(args, "train_class", ""),
        search_class_prefix=_merged(args, "search_class", ""),
        train_ids=_merged(args, "train_ids", None),
        search_ids=_merged(args, "search_ids", None),
        search_fraction=_merged(args, "search_fraction", 0.33),
        reference_ids=_merged(args, "reference_ids", None),
        n_references=_merged(args, "n_references", 5),
        min_words=_merged(args, "min_words", DEFAULT_MIN_WORDS),
        max_words=_merged(args, "max_words", DEFAULT_MAX_WORDS),
        claim_mode=_merged(args, "claim_mode", "first_only"),
        scorer=_merged(args, "scorer", "baseline"),
        scorer_cmd=_merged(args, "scorer_cmd", None),
        epochs=_merged(args, "epochs", DEFAULT_EPOCHS),
        learning_rate=_merged(args, "lr", DEFAULT_LEARNING_RATE),
        validation=_merged(args, "validation", 0.1),
        top_k=_merged(args, "top_k", 10),
        seed=_merged(args, "seed", 0),
        threads=_resolve_threads(args),
        exclude_references=bool(_merged(args, "exclude_references", False)),
        out_dir=args.out_dir,
    )
    report = run_experiment(config)
    for entry in report.references:
        print(f"reference={entry.reference_id} self_rank={entry.self_rank}")
    print(
        f"recall@1={report.recall_at_1} recall@10={report.recall_at_10} "
        f"mrr={report.mrr}"
    )
    print(f"artifacts={args.out_dir}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    docs = synth_corpus(
        args.n_patents,
        topic_vocab_size=_merged(args, "topic_vocab", 25),
        shared_vocab_size=_merged(args, "shared_vocab", 60),
        words_per_description=_merged(args, "desc_words", 400),
        seed=_merged(args, "seed", 0),
        threads=_resolve_threads(args),
    )
    write_corpus(args.out, docs)
    print(f"patents={len(docs)} out={args.out}")
    return EXIT_OK


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")
    try:
        args._config_data = _load_config_file(args)
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
