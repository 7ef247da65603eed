#!/usr/bin/env python3
"""Build (or reuse) a toy word corpus, train the net, export LPMW."""

import argparse
import logging
import os
import sys
import time

from kwtrainer import (
    TrainConfig,
    build_toy_corpus,
    export_weights,
    load_word_clips,
    train,
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", default="toy_words",
                    help="word-clip directory (one subdir per word)")
    ap.add_argument("--make-corpus", action="store_true",
                    help="synthesize the toy corpus into --corpus first")
    ap.add_argument("--words", type=int, default=10)
    ap.add_argument("--clips-per-word", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise-dir", default=None)
    ap.add_argument("--out", default="toy_model.lpmw")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    if args.make_corpus or not os.path.isdir(args.corpus):
        print(f"synthesizing {args.words}-word corpus under {args.corpus}/")
        build_toy_corpus(args.corpus, n_words=args.words,
                         clips_per_word=args.clips_per_word, seed=args.seed)
    clips = load_word_clips(args.corpus)
    config = TrainConfig(epochs=args.epochs, seed=args.seed,
                         noise_dir=args.noise_dir, export_path=args.out)
    start = time.monotonic()
    model, history = train(config, clips)
    print(f"trained {sum(p.numel() for p in model.parameters())} params "
          f"in {time.monotonic() - start:.0f}s; "
          f"held-out frame accuracy {history.heldout_accuracy:.3f}")
    export_weights(model, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
