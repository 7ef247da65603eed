"""Benchmark protocol: manifests, per-session trials, metrics, sweeps.

A manifest is JSON-lines with fields path, speaker, phrase, session,
mic, rep. Each trial samples a phrase subset per speaker, enrolls from
near-mic recordings of one session, and scores every held-out recording
of those phrases plus all aggressor (out-of-set) speech. Metrics are
averaged trials -> phrases -> speakers; reported spread is the standard
deviation across speakers.

Per-trial sampling contract (tests re-derive it independently): the
subset is numpy default_rng seeded with [seed, trial_index,
crc32(speaker)] choosing n phrases without replacement from the sorted
distinct phrase ids.
"""

from __future__ import annotations

import json
import math
import os
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .audio import load_audio, mix_noise_at_snr
from .engine import Engine
from .errors import (
    DuplicateEntryError,
    InsufficientDataError,
    MissingAudioError,
    NoInDomainPredictionsError,
    ParseError,
)
from .matcher import detect, enroll

AGGRESSOR = "AGGRESSOR"
MIC_CONDITIONS = ("near", "far", "unspecified")
CONDITIONS = ("all", "same_near", "same_far", "other")
SWEEP_AXES = ("n_phrases", "snr_db", "alpha")


@dataclass(frozen=True)
class ManifestEntry:
    audio_path: str
    speaker_id: str
    phrase_id: str
    session_id: str
    mic_condition: str = "unspecified"
    repetition: int | None = None

    @property
    def is_aggressor(self) -> bool:
        return self.phrase_id == AGGRESSOR


def load_manifest(path, check_audio: bool = True) -> list[ManifestEntry]:
    """Parse a JSONL manifest; relative paths resolve against its folder."""
    base = os.path.dirname(os.path.abspath(path))
    entries: list[ManifestEntry] = []
    keys: set[tuple] = set()
    agg_paths: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"line {lineno}: invalid JSON ({e})") from e
            for name in ("path", "speaker", "phrase", "session"):
                if name not in rec:
                    raise ParseError(f"line {lineno}: missing field {name!r}")
            mic = rec.get("mic", "unspecified")
            if mic not in MIC_CONDITIONS:
                raise ParseError(
                    f"line {lineno}: unknown mic value {mic!r} "
                    f"(expected one of {MIC_CONDITIONS})")
            rep = rec.get("rep")
            if rec["phrase"] == AGGRESSOR:
                if rep is not None:
                    raise ParseError(
                        f"line {lineno}: aggressor entries carry no rep field")
            else:
                if rep is None:
                    raise ParseError(f"line {lineno}: missing field 'rep'")
                if not isinstance(rep, int):
                    raise ParseError(f"line {lineno}: rep must be an integer")
            audio_path = rec["path"]
            if not os.path.isabs(audio_path):
                audio_path = os.path.join(base, audio_path)
            entry = ManifestEntry(audio_path=audio_path,
                                  speaker_id=str(rec["speaker"]),
                                  phrase_id=str(rec["phrase"]),
                                  session_id=str(rec["session"]),
                                  mic_condition=mic, repetition=rep)
            if entry.is_aggressor:
                if entry.audio_path in agg_paths:
                    raise DuplicateEntryError(
                        f"line {lineno}: duplicate aggressor path {rec['path']!r}")
                agg_paths.add(entry.audio_path)
            else:
                key = (entry.speaker_id, entry.phrase_id,
                       entry.session_id, entry.mic_condition, entry.repetition)
                if key in keys:
                    raise DuplicateEntryError(f"line {lineno}: duplicate key {key}")
                keys.add(key)
            entries.append(entry)
    if check_audio:
        missing = [e.audio_path for e in entries if not os.path.exists(e.audio_path)]
        if missing:
            raise MissingAudioError(
                f"{len(missing)} audio file(s) missing: {missing[:5]}")
    return entries


@dataclass(frozen=True)
class TrialSpec:
    """One enrollment/evaluation layout."""

    train_session: str
    n_phrases: int | None = None       # None -> every phrase the speaker has
    n_templates_per_phrase: int = 2
    alpha: float = 1.25
    snr_db: float | None = None        # mix noise into test utterances
    noise_path: str | None = None
    seed: int = 0
    rule: str = "literal"

    def __post_init__(self):
        if self.n_templates_per_phrase < 2:
            raise ValueError("need at least 2 templates per phrase")
        if self.n_phrases is not None and self.n_phrases < 1:
            raise ValueError("n_phrases must be >= 1")
        if self.snr_db is not None and self.noise_path is None:
            raise ValueError("snr_db set but no noise_path given")


@dataclass(frozen=True)
class Prediction:
    speaker_id: str
    truth: str
    predicted: str | None
    condition: str
    trial_index: int
    best_score: float


def _condition_of(entry: ManifestEntry, train_session: str) -> str:
    if entry.session_id != train_session:
        return "other"
    return "same_far" if entry.mic_condition == "far" else "same_near"


def sample_phrases(phrases, n: int, seed: int, trial_index: int,
                   speaker_id: str) -> list[str]:
    """Deterministic per-speaker phrase subset; the documented contract."""
    rng = np.random.default_rng(
        [seed, trial_index, zlib.crc32(speaker_id.encode("utf-8"))])
    picked = rng.choice(sorted(phrases), size=n, replace=False)
    return sorted(str(p) for p in picked)


class _EmbedCache:
    """Memoizes path -> embedding, keyed also by the noise condition."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self.store: dict[tuple, object] = {}
        self.noise: dict[str, object] = {}

    def get(self, path, snr_db=None, noise_path=None):
        key = (path, snr_db, noise_path)
        if key not in self.store:
            clip = load_audio(path)
            if snr_db is not None and not (math.isinf(snr_db) and snr_db > 0):
                if noise_path not in self.noise:
                    self.noise[noise_path] = load_audio(noise_path)
                clip = mix_noise_at_snr(clip, self.noise[noise_path], snr_db)
            self.store[key] = self.engine.embed_clip(clip)
        return self.store[key]


def run_trial(manifest, spec: TrialSpec, engine: Engine, trial_index: int = 0,
              cache: _EmbedCache | None = None) -> list[Prediction]:
    """Enroll and score one trial for every speaker in the manifest."""
    if cache is None:
        cache = _EmbedCache(engine)
    speakers = sorted({e.speaker_id for e in manifest})
    predictions: list[Prediction] = []
    for sp in speakers:
        rows = [e for e in manifest if e.speaker_id == sp]
        phrases = sorted({e.phrase_id for e in rows if not e.is_aggressor})
        if not phrases:
            continue
        n = len(phrases) if spec.n_phrases is None else spec.n_phrases
        if n > len(phrases):
            raise InsufficientDataError(
                f"speaker {sp!r}: asked for {n} phrases, has {len(phrases)}")
        subset = sample_phrases(phrases, n, spec.seed, trial_index, sp)

        enrolled: list[ManifestEntry] = []
        utterances = []
        for ph in subset:
            cands = sorted((e for e in rows
                            if e.phrase_id == ph
                            and e.session_id == spec.train_session
                            and e.mic_condition in ("near", "unspecified")),
                           key=lambda e: (e.repetition, e.audio_path))
            if len(cands) < spec.n_templates_per_phrase:
                raise InsufficientDataError(
                    f"speaker {sp!r} phrase {ph!r}: "
                    f"{len(cands)} enrollable recording(s) in session "
                    f"{spec.train_session!r}, need {spec.n_templates_per_phrase}")
            for e in cands[:spec.n_templates_per_phrase]:
                enrolled.append(e)
                utterances.append((ph, cache.get(e.audio_path)))
        pset = enroll(utterances, alpha=spec.alpha, cfg=engine.dtw_config,
                      backend=engine.backend)

        enrolled_ids = {id(e) for e in enrolled}
        test_rows = [e for e in rows
                     if (e.is_aggressor or e.phrase_id in subset)
                     and id(e) not in enrolled_ids]
        for e in sorted(test_rows, key=lambda e: e.audio_path):
            seq = cache.get(e.audio_path, spec.snr_db, spec.noise_path)
            result = detect(pset, seq, rule=spec.rule)
            predictions.append(Prediction(
                speaker_id=sp,
                truth=e.phrase_id,
                predicted=result.label,
                condition=_condition_of(e, spec.train_session),
                trial_index=trial_index,
                best_score=result.best_score,
            ))
    return predictions


@dataclass(frozen=True)
class MetricRow:
    speaker_id: str           # "ALL" aggregates across speakers
    condition: str
    n_trials: int
    in_domain_total: int      # counts are sums over trials
    correct: int
    wrong: int
    rejected: int
    aggressor_total: int
    aggressor_detected: int
    accuracy: float
    accuracy_std: float
    precision: float
    precision_std: float
    recall: float
    recall_std: float
    fdr: float
    fdr_std: float


_CSV_FIELDS = [f.strip() for f in (
    "speaker,condition,n_trials,in_domain_total,correct,wrong,rejected,"
    "aggressor_total,aggressor_detected,accuracy,accuracy_std,"
    "precision,precision_std,recall,recall_std,fdr,fdr_std").split(",")]


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[MetricRow, ...]
    params: dict = field(default_factory=dict)

    def row(self, speaker_id: str, condition: str) -> MetricRow:
        for r in self.rows:
            if r.speaker_id == speaker_id and r.condition == condition:
                return r
        raise KeyError((speaker_id, condition))

    def headline(self) -> MetricRow:
        return self.row("ALL", "all")

    def csv_lines(self) -> list[str]:
        def fmt(x):
            if isinstance(x, float):
                return "" if math.isnan(x) else f"{x:.6f}"
            return str(x)
        lines = [",".join(_CSV_FIELDS)]
        for r in self.rows:
            lines.append(",".join(fmt(v) for v in (
                r.speaker_id, r.condition, r.n_trials, r.in_domain_total,
                r.correct, r.wrong, r.rejected, r.aggressor_total,
                r.aggressor_detected, r.accuracy, r.accuracy_std,
                r.precision, r.precision_std, r.recall, r.recall_std,
                r.fdr, r.fdr_std)))
        return lines

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(self.csv_lines()) + "\n")

    def summary_text(self) -> str:
        def pm(mean, std):
            if math.isnan(mean):
                return "n/a"
            return f"{mean:.3f} +- {std:.3f}"
        lines = ["phrase recognition evaluation"]
        if self.params:
            lines.append("  " + " ".join(f"{k}={v}" for k, v in
                                         sorted(self.params.items())))
        for r in self.rows:
            if r.speaker_id != "ALL":
                continue
            lines.append(
                f"  condition={r.condition:<10} accuracy={pm(r.accuracy, r.accuracy_std)}"
                f" precision={pm(r.precision, r.precision_std)}"
                f" recall={pm(r.recall, r.recall_std)}"
                f" fdr={pm(r.fdr, r.fdr_std)}")
        return "\n".join(lines)


def _nanmean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def _speaker_condition_stats(preds: list[Prediction]):
    """Trial-mean metrics for one (speaker, condition) bucket."""
    trials = sorted({p.trial_index for p in preds})
    acc, fdr = [], []
    counts = np.zeros(4, dtype=int)  # in_domain, correct, wrong, rejected
    agg_total = agg_detected = 0
    per_phrase_recall: dict[str, list[float]] = {}
    per_phrase_precision: dict[str, list[float]] = {}
    for t in trials:
        bucket = [p for p in preds if p.trial_index == t]
        in_dom = [p for p in bucket if p.truth != AGGRESSOR]
        agg = [p for p in bucket if p.truth == AGGRESSOR]
        if in_dom:
            correct = sum(p.predicted == p.truth for p in in_dom)
            wrong = sum(p.predicted is not None and p.predicted != p.truth
                        for p in in_dom)
            rejected = sum(p.predicted is None for p in in_dom)
            counts[:4] += (len(in_dom), correct, wrong, rejected)
            acc.append(correct / len(in_dom))
        if agg:
            detected = sum(p.predicted is not None for p in agg)
            agg_total += len(agg)
            agg_detected += detected
            fdr.append(detected / len(agg))
        for ph in sorted({p.truth for p in in_dom}):
            truth_ph = [p for p in in_dom if p.truth == ph]
            tp = sum(p.predicted == ph for p in truth_ph)
            per_phrase_recall.setdefault(ph, []).append(tp / len(truth_ph))
            pred_ph = sum(p.predicted == ph for p in bucket)
            if pred_ph > 0:
                per_phrase_precision.setdefault(ph, []).append(tp / pred_ph)
            else:
                per_phrase_precision.setdefault(ph, []).append(math.nan)
    recall = _nanmean([_nanmean(v) for v in per_phrase_recall.values()]) \
        if per_phrase_recall else math.nan
    precision = _nanmean([_nanmean(v) for v in per_phrase_precision.values()]) \
        if per_phrase_precision else math.nan
    return {
        "n_trials": len(trials),
        "counts": (int(counts[0]), int(counts[1]), int(counts[2]),
                   int(counts[3]), agg_total, agg_detected),
        "accuracy": _nanmean(acc) if acc else math.nan,
        "precision": precision,
        "recall": recall,
        "fdr": _nanmean(fdr) if fdr else math.nan,
    }


def compute_metrics(predictions: list[Prediction],
                    params: dict | None = None) -> EvalReport:
    """Aggregate raw predictions into per-speaker/per-condition rows.

    Order of aggregation: trials, then phrases (macro), then speakers;
    the ALL rows carry mean and population-std across speakers.
    """
    if not predictions:
        raise NoInDomainPredictionsError("no predictions at all")
    if all(p.truth == AGGRESSOR for p in predictions):
        raise NoInDomainPredictionsError("only aggressor predictions present")
    speakers = sorted({p.speaker_id for p in predictions})
    conditions = ["all"] + [c for c in CONDITIONS[1:]
                            if any(p.condition == c for p in predictions)]
    rows: list[MetricRow] = []
    per_speaker: dict[str, dict[str, dict]] = {}
    for sp in speakers:
        sp_preds = [p for p in predictions if p.speaker_id == sp]
        per_speaker[sp] = {}
        for cond in conditions:
            bucket = sp_preds if cond == "all" else \
                [p for p in sp_preds if p.condition == cond]
            if not bucket:
                continue
            stats = _speaker_condition_stats(bucket)
            per_speaker[sp][cond] = stats
            rows.append(MetricRow(
                speaker_id=sp, condition=cond, n_trials=stats["n_trials"],
                in_domain_total=stats["counts"][0], correct=stats["counts"][1],
                wrong=stats["counts"][2], rejected=stats["counts"][3],
                aggressor_total=stats["counts"][4],
                aggressor_detected=stats["counts"][5],
                accuracy=stats["accuracy"], accuracy_std=math.nan,
                precision=stats["precision"], precision_std=math.nan,
                recall=stats["recall"], recall_std=math.nan,
                fdr=stats["fdr"], fdr_std=math.nan))
    all_rows: list[MetricRow] = []
    for cond in conditions:
        stats = [per_speaker[sp][cond] for sp in speakers
                 if cond in per_speaker[sp]]
        if not stats:
            continue

        def agg(key):
            vals = [s[key] for s in stats if not math.isnan(s[key])]
            if not vals:
                return math.nan, math.nan
            return float(np.mean(vals)), float(np.std(vals))

        acc, acc_s = agg("accuracy")
        prec, prec_s = agg("precision")
        rec, rec_s = agg("recall")
        fdr, fdr_s = agg("fdr")
        csum = np.sum([s["counts"] for s in stats], axis=0)
        all_rows.append(MetricRow(
            speaker_id="ALL", condition=cond,
            n_trials=max(s["n_trials"] for s in stats),
            in_domain_total=int(csum[0]), correct=int(csum[1]),
            wrong=int(csum[2]), rejected=int(csum[3]),
            aggressor_total=int(csum[4]), aggressor_detected=int(csum[5]),
            accuracy=acc, accuracy_std=acc_s, precision=prec,
            precision_std=prec_s, recall=rec, recall_std=rec_s,
            fdr=fdr, fdr_std=fdr_s))
    return EvalReport(rows=tuple(all_rows + rows), params=dict(params or {}))


def run_benchmark(manifest, spec: TrialSpec, engine: Engine,
                  n_trials: int = 1, cache: _EmbedCache | None = None) -> EvalReport:
    """n_trials independent phrase samplings under one spec."""
    if cache is None:
        cache = _EmbedCache(engine)
    predictions: list[Prediction] = []
    for trial in range(n_trials):
        predictions.extend(run_trial(manifest, spec, engine, trial_index=trial,
                                     cache=cache))
    params = {"alpha": spec.alpha, "rule": spec.rule,
              "n_phrases": spec.n_phrases, "snr_db": spec.snr_db,
              "templates": spec.n_templates_per_phrase, "seed": spec.seed,
              "trials": n_trials, "train_session": spec.train_session,
              "backend": engine.backend.backend_id,
              "metric": engine.dtw_config.local_metric}
    return compute_metrics(predictions, params)


def sweep(manifest, base_spec: TrialSpec, engine: Engine, axis: str, values,
          n_trials: int = 1, csv_path=None, chart_path=None):
    """One report per axis value with paired trial seeds across values."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ValueError("no sweep values given")
    cache = _EmbedCache(engine)
    results = []
    for v in values:
        spec_v = replace(base_spec, **{axis: None if v is None else
                         (int(v) if axis == "n_phrases" else float(v))})
        try:
            report = run_benchmark(manifest, spec_v, engine, n_trials, cache)
        except Exception as e:
            raise type(e)(f"{axis}={v}: {e}") from e
        results.append((v, report))
    if csv_path is not None:
        lines = [f"axis,value,{','.join(_CSV_FIELDS)}"]
        for v, report in results:
            for line in report.csv_lines()[1:]:
                lines.append(f"{axis},{v},{line}")
        with open(csv_path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    if chart_path is not None:
        _render_chart(results, axis, chart_path)
    return results


def _render_chart(results, axis: str, chart_path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = list(range(len(results)))
    labels = [str(v) for v, _ in results]
    fig, ax = plt.subplots(figsize=(6, 4))
    for metric in ("accuracy", "precision", "recall", "fdr"):
        ys, errs = [], []
        for _, report in results:
            r = report.headline()
            ys.append(getattr(r, metric))
            errs.append(getattr(r, f"{metric}_std"))
        if all(math.isnan(y) for y in ys):
            continue
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=metric)
    ax.set_xticks(xs, labels)
    ax.set_xlabel(axis)
    ax.set_ylim(-0.05, 1.05)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(chart_path, dpi=120)
    plt.close(fig)
