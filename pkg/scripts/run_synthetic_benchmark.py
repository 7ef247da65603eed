#!/usr/bin/env python3
"""End-to-end synthetic benchmark: corpus generation, SNR and n sweeps.

Builds a multi-tone phrase corpus, evaluates the spectral engine over a
grid of noise levels and enrolled-phrase counts, and writes CSV reports
(plus optional charts) into the work directory.
"""

import argparse
import math
import sys
from pathlib import Path

from phrasematch.engine import Engine
from phrasematch.evaluate import TrialSpec, load_manifest, run_benchmark, sweep
from phrasematch.synthetic import build_corpus


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="bench_out")
    ap.add_argument("--n-phrases", type=int, default=50)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=20250810)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--alpha", type=float, default=math.inf,
                    help="inf = closed-set classification")
    ap.add_argument("--rule", choices=("literal", "strict"), default="literal")
    ap.add_argument("--snr-values", default="5,10,20",
                    help="comma list of SNRs in dB for the noise sweep")
    ap.add_argument("--n-values", default="5,10,20,30,50",
                    help="comma list for the enrolled-phrase-count sweep")
    ap.add_argument("--no-charts", action="store_true")
    args = ap.parse_args(argv)

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    print(f"building corpus ({args.n_phrases} phrases x {args.reps} reps) ...")
    manifest_path, noise_path = build_corpus(
        str(work / "corpus"), n_phrases=args.n_phrases, n_reps=args.reps,
        seed=args.seed)
    manifest = load_manifest(manifest_path)
    engine = Engine.spectral()
    base = TrialSpec(train_session="s0", alpha=args.alpha, rule=args.rule,
                     seed=args.seed, snr_db=20.0, noise_path=noise_path)

    print("clean reference run ...")
    clean = run_benchmark(manifest,
                          TrialSpec(train_session="s0", alpha=args.alpha,
                                    rule=args.rule, seed=args.seed),
                          engine, n_trials=args.trials)
    clean.to_csv(work / "clean.csv")
    print(clean.summary_text())

    snr_values = [float(v) for v in args.snr_values.split(",")]
    print(f"SNR sweep {snr_values} ...")
    snr_results = sweep(manifest, base, engine, "snr_db", snr_values,
                        n_trials=args.trials, csv_path=work / "snr_sweep.csv",
                        chart_path=None if args.no_charts else work / "snr_sweep.png")
    for v, rep in snr_results:
        r = rep.row("ALL", "all")
        print(f"  snr={v:>5} dB  accuracy={r.accuracy:.3f}+-{r.accuracy_std:.3f}"
              f"  fdr={r.fdr:.3f}")

    n_values = [int(v) for v in args.n_values.split(",")]
    n_values = [n for n in n_values if n <= args.n_phrases]
    print(f"enrolled-phrase-count sweep {n_values} ...")
    n_results = sweep(manifest, base, engine, "n_phrases", n_values,
                      n_trials=args.trials, csv_path=work / "n_sweep.csv",
                      chart_path=None if args.no_charts else work / "n_sweep.png")
    for v, rep in n_results:
        r = rep.row("ALL", "all")
        print(f"  n={v:>3}  accuracy={r.accuracy:.3f}+-{r.accuracy_std:.3f}")

    print(f"reports written under {work}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
