#!/usr/bin/env python3
"""Run the self-retrieval experiment at desk scale on a synthetic corpus.

Mirrors the full-scale procedure (configs/full_scale.json) with a planted
synthetic corpus small enough to finish in seconds: 100 training patents, a
50-patent search pool, 5 sampled references, lexical baseline scorer.
"""

import argparse
import sys

from ftopipe.evalharness import ExperimentConfig, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="runs/desk", help="artifact directory")
    parser.add_argument("--patents", type=int, default=150, help="synthetic corpus size")
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--epochs", type=int, default=200, help="baseline training epochs")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    args = parser.parse_args()

    ids = [f"SYN{i:04d}B2" for i in range(args.patents)]
    split = args.patents - args.patents // 3
    config = ExperimentConfig(
        synth_patents=args.patents,
        train_ids=tuple(ids[:split]),
        search_ids=tuple(ids[split:]),
        n_references=5,
        epochs=args.epochs,
        seed=args.seed,
        threads=args.threads,
        out_dir=args.out_dir,
    )
    report = run_experiment(config)
    for entry in report.references:
        print(f"reference={entry.reference_id} self_rank={entry.self_rank}")
    print(f"recall@1={report.recall_at_1} recall@10={report.recall_at_10} mrr={report.mrr}")
    print(f"artifacts written to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
