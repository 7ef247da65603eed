"""Command-line front end: enroll, detect, eval.

Machine-readable results go to stdout as one JSON object per line
(format tag "phrasematch.v1"); logs and errors go to stderr, so stdout
stays parseable. Exit status is 0 only on success.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from .dtw import DtwConfig
from .engine import Engine
from .errors import PhrasematchError
from .evaluate import (
    AGGRESSOR,
    SWEEP_AXES,
    TrialSpec,
    load_manifest,
    run_benchmark,
    sweep,
)
from .matcher import load_phrase_set, save_phrase_set

log = logging.getLogger("phrasematch")

FORMAT_TAG = "phrasematch.v1"
WEIGHTS_ENV_VAR = "PHRASEMATCH_WEIGHTS"

_AXIS_ALIASES = {"n": "n_phrases", "n_phrases": "n_phrases",
                 "snr": "snr_db", "snr_db": "snr_db", "alpha": "alpha"}


def _json_safe(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float) and math.isnan(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def _emit(obj: dict) -> None:
    obj = {"format": FORMAT_TAG, **obj}
    print(json.dumps(_json_safe(obj), sort_keys=True))


def _parse_alpha(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError("alpha must be positive (or inf)")
    return value


def _add_engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("spectral", "kws"), default="spectral")
    p.add_argument("--weights", default=None,
                   help=f"LPMW weight file (default: ${WEIGHTS_ENV_VAR})")
    p.add_argument("--metric", choices=("cosine", "euclidean"), default="cosine")
    p.add_argument("--band-radius", type=int, default=None)
    p.add_argument("--sad-threshold", type=float, default=0.5)
    p.add_argument("--drop-interior-silence", action="store_true")


def _build_engine(args) -> Engine:
    cfg = DtwConfig(local_metric=args.metric, band_radius=args.band_radius)
    common = dict(dtw_config=cfg, sad_threshold=args.sad_threshold,
                  drop_interior_silence=args.drop_interior_silence)
    if args.backend == "kws":
        weights = args.weights or os.environ.get(WEIGHTS_ENV_VAR)
        if not weights:
            raise PhrasematchError(
                f"--backend kws needs --weights or ${WEIGHTS_ENV_VAR}")
        return Engine.from_weights(weights, **common)
    return Engine.spectral(**common)


def _cmd_enroll(args) -> int:
    engine = _build_engine(args)
    grouped: dict[str, list[str]] = {}
    for group in args.phrase:
        label, files = group[0], group[1:]
        if not files:
            raise PhrasematchError(f"--phrase {label}: no audio files given")
        grouped.setdefault(label, []).extend(files)
    pset = engine.enroll_paths(grouped, alpha=args.alpha)
    save_phrase_set(pset, args.out)
    log.info("wrote %d templates to %s", len(pset.templates), args.out)
    _emit({"type": "enrollment", "path": args.out, "alpha": pset.alpha,
           "backend": pset.backend_id,
           "templates": [{"label": t.label, "tau": t.threshold_tau}
                         for t in pset.templates]})
    return 0


def _cmd_detect(args) -> int:
    engine = _build_engine(args)
    pset = load_phrase_set(args.phrase_set, backend=engine.backend)
    result = engine.detect_path(pset, args.audio, rule=args.rule)
    _emit({"type": "detection",
           "decision": "detected" if result.detected else "rejected",
           "label": result.label,
           "best_score": result.best_score,
           "best_template_index": result.best_template_index,
           "scores": result.per_template_scores,
           "rule": args.rule,
           "audio": args.audio})
    return 0


def _report_payload(report, axis=None, value=None) -> dict:
    conditions = {}
    for row in report.rows:
        if row.speaker_id != "ALL":
            continue
        conditions[row.condition] = {
            "accuracy": row.accuracy, "accuracy_std": row.accuracy_std,
            "precision": row.precision, "recall": row.recall,
            "fdr": row.fdr, "fdr_std": row.fdr_std,
            "in_domain_total": row.in_domain_total,
            "correct": row.correct, "wrong": row.wrong,
            "rejected": row.rejected,
            "aggressor_total": row.aggressor_total,
            "aggressor_detected": row.aggressor_detected,
            "n_trials": row.n_trials,
        }
    payload = {"type": "eval_report", "conditions": conditions,
               "params": report.params}
    if axis is not None:
        payload["axis"] = axis
        payload["value"] = value
    return payload


def _cmd_eval(args) -> int:
    engine = _build_engine(args)
    manifest = load_manifest(args.manifest)
    train_session = args.train_session
    if train_session is None:
        sessions = sorted({e.session_id for e in manifest
                           if e.phrase_id != AGGRESSOR})
        if not sessions:
            raise PhrasematchError("manifest has no in-domain entries")
        train_session = sessions[0]
        log.info("using train session %r", train_session)
    spec = TrialSpec(train_session=train_session, n_phrases=args.n_phrases,
                     n_templates_per_phrase=args.templates_per_phrase,
                     alpha=args.alpha, snr_db=args.snr, noise_path=args.noise,
                     seed=args.seed, rule=args.rule)
    if args.sweep:
        axis_raw, _, values_raw = args.sweep.partition("=")
        axis = _AXIS_ALIASES.get(axis_raw.strip())
        if axis is None or not values_raw:
            raise PhrasematchError(
                f"--sweep expects axis=v1,v2 with axis in {sorted(_AXIS_ALIASES)}")
        values = [float(v) for v in values_raw.split(",")]
        if axis == "n_phrases":
            values = [int(v) for v in values]
        if axis not in SWEEP_AXES:
            raise PhrasematchError(f"cannot sweep axis {axis!r}")
        csv_path = f"{args.out}_sweep.csv"
        results = sweep(manifest, spec, engine, axis, values,
                        n_trials=args.trials, csv_path=csv_path,
                        chart_path=args.chart)
        log.info("wrote %s", csv_path)
        for v, report in results:
            _emit(_report_payload(report, axis=axis, value=v))
        return 0
    report = run_benchmark(manifest, spec, engine, n_trials=args.trials)
    report.to_csv(f"{args.out}.csv")
    with open(f"{args.out}_summary.txt", "w", encoding="utf-8") as f:
        f.write(report.summary_text() + "\n")
    log.info("wrote %s.csv and %s_summary.txt", args.out, args.out)
    print(report.summary_text(), file=sys.stderr)
    _emit(_report_payload(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phrasematch",
        description="Few-shot spoken phrase matching over DTW embeddings.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_enroll = sub.add_parser("enroll", help="build a phrase set from recordings")
    _add_engine_args(p_enroll)
    p_enroll.add_argument("--phrase", nargs="+", action="append", required=True,
                          metavar="LABEL FILE",
                          help="label followed by >=2 WAV files; repeatable")
    p_enroll.add_argument("--alpha", type=_parse_alpha, default=1.25)
    p_enroll.add_argument("--out", required=True, help="output LPMS path")
    p_enroll.set_defaults(func=_cmd_enroll)

    p_detect = sub.add_parser("detect", help="score one query against a phrase set")
    _add_engine_args(p_detect)
    p_detect.add_argument("phrase_set", help="LPMS file from enroll")
    p_detect.add_argument("audio", help="query WAV")
    p_detect.add_argument("--rule", choices=("literal", "strict"), default="literal")
    p_detect.set_defaults(func=_cmd_detect)

    p_eval = sub.add_parser("eval", help="run the benchmark protocol on a manifest")
    _add_engine_args(p_eval)
    p_eval.add_argument("manifest", help="JSONL manifest")
    p_eval.add_argument("--train-session", default=None)
    p_eval.add_argument("--n-phrases", type=int, default=None)
    p_eval.add_argument("--templates-per-phrase", type=int, default=2)
    p_eval.add_argument("--trials", type=int, default=1)
    p_eval.add_argument("--alpha", type=_parse_alpha, default=1.25)
    p_eval.add_argument("--rule", choices=("literal", "strict"), default="literal")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--snr", type=float, default=None)
    p_eval.add_argument("--noise", default=None)
    p_eval.add_argument("--sweep", default=None, metavar="AXIS=V1,V2",
                        help="axis in {n, snr, alpha}")
    p_eval.add_argument("--chart", default=None, help="optional PNG path")
    p_eval.add_argument("--out", default="eval_report", help="output prefix")
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PhrasematchError, FileNotFoundError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
