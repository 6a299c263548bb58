"""Command-line interface for training and serving the pair classifier.

Exit codes match the analysis pipeline's convention: 0 success, 1 usage
error (bad flags, unknown subcommand), 2 data error (malformed pairs,
invalid configuration, unresolvable model).
"""

import argparse
import sys

from . import __version__
from .config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_LEN,
    DEFAULT_MODEL,
    FinetuneConfig,
    TrainerError,
)
from .pretraining import (
    DEFAULT_PRETRAIN_BATCH_SIZE,
    DEFAULT_PRETRAIN_EPOCHS,
    DEFAULT_PRETRAIN_LEARNING_RATE,
    PretrainConfig,
    pretrain_mlm,
)
from .serving import serve_scores
from .training import train_finetune

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="fto-trainer",
        description="Fine-tune and serve a sequence-pair classifier over patent pairs.",
    )
    parser.add_argument("--version", action="version", version=f"fto-trainer {__version__}")
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=_ArgumentParser
    )

    train = commands.add_parser(
        "train", help="fine-tune an encoder on a labeled pair file"
    )
    train.add_argument("--pairs", required=True, help="training pair JSON-lines file")
    train.add_argument("--out", required=True, help="output directory for model and metrics")
    train.add_argument(
        "--validation", default=None, help="held-out pair JSON-lines file (optional)"
    )
    train.add_argument(
        "--model", default=DEFAULT_MODEL,
        help="local model directory, scratch:<preset>, or a pretrained checkpoint name "
        f"(default: {DEFAULT_MODEL})",
    )
    train.add_argument(
        "--max-len", type=int, default=DEFAULT_MAX_LEN,
        help=f"encoded sequence length (default: {DEFAULT_MAX_LEN})",
    )
    train.add_argument(
        "--epochs", type=int, default=DEFAULT_EPOCHS,
        help=f"training epochs (default: {DEFAULT_EPOCHS})",
    )
    train.add_argument(
        "--lr", type=float, default=DEFAULT_LEARNING_RATE,
        help=f"learning rate (default: {DEFAULT_LEARNING_RATE})",
    )
    train.add_argument(
        "--batch-size", type=int, default=DEFAULT_BATCH_SIZE,
        help=f"training batch size (default: {DEFAULT_BATCH_SIZE})",
    )
    train.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    train.set_defaults(func=_cmd_train)

    pretrain = commands.add_parser(
        "pretrain",
        help="pretrain a masked-LM encoder from scratch on pair-file texts",
    )
    pretrain.add_argument("--pairs", required=True, help="pair JSON-lines file (labels unused)")
    pretrain.add_argument("--out", required=True, help="output directory for the encoder")
    pretrain.add_argument(
        "--preset", default="tiny", choices=("tiny", "small"),
        help="encoder size preset (default: tiny)",
    )
    pretrain.add_argument(
        "--max-len", type=int, default=DEFAULT_MAX_LEN,
        help=f"truncation cap in tokens (default: {DEFAULT_MAX_LEN})",
    )
    pretrain.add_argument(
        "--epochs", type=int, default=DEFAULT_PRETRAIN_EPOCHS,
        help=f"pretraining epochs (default: {DEFAULT_PRETRAIN_EPOCHS})",
    )
    pretrain.add_argument(
        "--lr", type=float, default=DEFAULT_PRETRAIN_LEARNING_RATE,
        help=f"learning rate (default: {DEFAULT_PRETRAIN_LEARNING_RATE})",
    )
    pretrain.add_argument(
        "--batch-size", type=int, default=DEFAULT_PRETRAIN_BATCH_SIZE,
        help=f"pretraining batch size (default: {DEFAULT_PRETRAIN_BATCH_SIZE})",
    )
    pretrain.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    pretrain.set_defaults(func=_cmd_pretrain)

    serve = commands.add_parser(
        "serve", help="score pair requests from stdin, one JSON line each"
    )
    serve.add_argument("--model", required=True, help="fine-tuned model directory")
    serve.add_argument(
        "--max-len", type=int, default=None,
        help="encoded sequence length (default: the max_len the model was trained with)",
    )
    serve.set_defaults(func=_cmd_serve)

    return parser


def _cmd_train(args) -> int:
    config = FinetuneConfig(
        pairs_path=args.pairs,
        out_dir=args.out,
        validation_path=args.validation,
        model=args.model,
        max_len=args.max_len,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    metrics = train_finetune(config)
    losses = ", ".join(f"{loss:.4f}" for loss in metrics["epoch_losses"])
    print(f"model={args.out} epoch_losses=[{losses}] train_accuracy={metrics['train_accuracy']:.4f}")
    if "validation_accuracies" in metrics:
        accs = ", ".join(f"{acc:.4f}" for acc in metrics["validation_accuracies"])
        print(f"validation_accuracies=[{accs}]")
    return EXIT_OK


def _cmd_pretrain(args) -> int:
    config = PretrainConfig(
        pairs_path=args.pairs,
        out_dir=args.out,
        preset=args.preset,
        max_len=args.max_len,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    metrics = pretrain_mlm(config)
    losses = metrics["epoch_losses"]
    print(
        f"encoder={args.out} vocab_size={metrics['vocab_size']} "
        f"first_loss={losses[0]:.4f} last_loss={losses[-1]:.4f}"
    )
    return EXIT_OK


def _cmd_serve(args) -> int:
    serve_scores(args.model, max_len=args.max_len)
    return EXIT_OK


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
