#!/usr/bin/env python3
"""End-to-end experiment on the bundled synthetic review generator.

Generates a labeled corpus, trains character embeddings and the
recurrent classifier, and prints the per-epoch history plus held-out
test metrics. Every stage is seeded, so a rerun with the same
arguments reproduces the numbers exactly.

Usage:
    python3 scripts/run_synthetic_experiment.py --reviews 2000 --seed 42
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import charsent as cs
from charsent.synthetic import generate_corpus


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reviews", type=int, default=2000, help="corpus size")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--dim", type=int, default=16, help="embedding width")
    ap.add_argument("--hidden-size", type=int, default=32)
    ap.add_argument("--max-len", type=int, default=60)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--w2v-epochs", type=int, default=3)
    ap.add_argument(
        "--mode", choices=("cbow", "skipgram"), default="cbow", help="embedding objective"
    )
    ap.add_argument("--dropout", type=float, default=0.5)
    ap.add_argument("--patience", type=int, default=3)
    ap.add_argument(
        "--out-dir", type=Path, default=None, help="save model/history/embeddings here"
    )
    return ap.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    t0 = time.perf_counter()

    corpus = generate_corpus(args.reviews, seed=args.seed)
    train_reviews, val_reviews, test_reviews = cs.split(
        corpus, train_frac=0.7, val_frac=0.15, seed=args.seed
    )
    print(
        f"corpus: {len(corpus)} reviews "
        f"(train {len(train_reviews)}, val {len(val_reviews)}, test {len(test_reviews)})"
    )

    vocab = cs.build_vocab([r.text for r in train_reviews], min_count=1)
    print(f"vocabulary: {len(vocab)} ids")

    w2v = cs.W2vConfig(
        mode=args.mode, dim=args.dim, epochs=args.w2v_epochs, window=4, negatives=5,
        seed=args.seed,
    )
    sequences = [
        cs.encode(cs.segment_chars(r.text), vocab, max_len=args.max_len)
        for r in train_reviews
    ]
    losses: list[float] = []
    embeddings = cs.train_embeddings(sequences, vocab, w2v, epoch_losses=losses)
    per_epoch = ", ".join(f"{x:.4f}" for x in losses)
    print(f"embedding loss per epoch ({args.mode}): {per_epoch}")

    model = cs.Model(
        vocab=vocab,
        embeddings=embeddings,
        params=cs.init_lstm_params(args.hidden_size, args.dim, seed=args.seed),
        max_len=args.max_len,
    )
    cfg = cs.TrainConfig(
        epochs=args.epochs,
        dropout_rate=args.dropout,
        patience=args.patience,
        seed=args.seed,
    )
    train_set = cs.encode_labeled(train_reviews, vocab, args.max_len)
    val_set = cs.encode_labeled(val_reviews, vocab, args.max_len)
    best, history = cs.train(train_set, val_set, model, cfg)

    print(f"\n{'epoch':>5} {'train_loss':>10} {'train_acc':>9} {'val_loss':>10} {'val_acc':>9}")
    for rec in history.records:
        marker = " *" if rec.epoch == history.best_epoch else ""
        print(
            f"{rec.epoch:>5} {rec.train_loss:>10.4f} {rec.train_acc:>9.4f} "
            f"{rec.val_loss:>10.4f} {rec.val_acc:>9.4f}{marker}"
        )
    print(f"best epoch {history.best_epoch}, stopped_early={history.stopped_early}")

    test_set = cs.encode_labeled(test_reviews, vocab, args.max_len)
    test = cs.evaluate(best, test_set)
    print(
        f"\ntest: loss {test.loss:.4f}, mae {test.mae:.4f}, "
        f"accuracy {test.accuracy:.4f}, precision {test.precision:.4f}, "
        f"recall {test.recall:.4f}"
    )
    print(f"elapsed {time.perf_counter() - t0:.1f}s")

    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        cs.save_embeddings(embeddings, vocab, args.out_dir / "embeddings.w2v")
        cs.save_model(best, args.out_dir / "model.bin")
        cs.save_history(history, args.out_dir / "history.json")
        print(f"artifacts written to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
