"""Minimal training front end: ``dlbaselines train --dataset ... --model ...``."""

from __future__ import annotations

import argparse
import sys

from .train import TrainConfig, rows_to_csv, train_and_evaluate


def main(argv=None):
    parser = argparse.ArgumentParser(prog="dlbaselines",
                                     description="neural receiver training")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a slot dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=("densenet", "hyperwienernet"),
                   default="densenet")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--cfo-augment", action="store_true")
    p.add_argument("--n-pretrain", type=int, default=0)
    p.add_argument("--out", default="nn_report.csv")
    args = parser.parse_args(argv)

    cfg = TrainConfig(model=args.model, epochs=args.epochs,
                      batch_size=args.batch_size, learning_rate=args.learning_rate,
                      seed=args.seed, patience=args.patience,
                      cfo_augment=args.cfo_augment, n_pretrain=args.n_pretrain)
    result, _model = train_and_evaluate(args.dataset, cfg)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(result.rows))
    print(f"best epoch {result.best_epoch}, test BER {result.test_ber:.4e}, "
          f"report -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
