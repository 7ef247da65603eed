import json
import math
import zlib

import numpy as np
import pytest

from phrasematch.engine import Engine
from phrasematch.errors import (
    DuplicateEntryError,
    InsufficientDataError,
    MissingAudioError,
    NoInDomainPredictionsError,
    ParseError,
)
from phrasematch.evaluate import (
    Prediction,
    TrialSpec,
    compute_metrics,
    load_manifest,
    run_benchmark,
    run_trial,
    sample_phrases,
    sweep,
)


def write_manifest(tmp_path, rows, audio_bytes=b"RIFF"):
    paths = set()
    for r in rows:
        paths.add(r["path"])
    for p in paths:
        target = tmp_path / p
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(audio_bytes)
    mpath = tmp_path / "manifest.jsonl"
    with open(mpath, "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")
    return mpath


def base_rows():
    return [
        {"path": "a0.wav", "speaker": "s1", "phrase": "up", "session": "x",
         "mic": "near", "rep": 0},
        {"path": "a1.wav", "speaker": "s1", "phrase": "up", "session": "x",
         "mic": "near", "rep": 1},
        {"path": "agg.wav", "speaker": "s1", "phrase": "AGGRESSOR",
         "session": "x", "mic": "near"},
    ]


class TestManifest:
    def test_well_formed(self, tmp_path):
        entries = load_manifest(write_manifest(tmp_path, base_rows()))
        assert len(entries) == 3
        assert entries[2].is_aggressor and entries[2].repetition is None
        assert entries[0].audio_path.endswith("a0.wav")

    def test_mic_defaults_to_unspecified(self, tmp_path):
        rows = base_rows()
        del rows[0]["mic"]
        entries = load_manifest(write_manifest(tmp_path, rows))
        assert entries[0].mic_condition == "unspecified"

    def test_unknown_mic_named_in_error(self, tmp_path):
        rows = base_rows()
        rows[0]["mic"] = "medium"
        with pytest.raises(ParseError, match="mic"):
            load_manifest(write_manifest(tmp_path, rows))

    def test_duplicate_key_rejected(self, tmp_path):
        rows = base_rows()
        rows.append(dict(rows[0], path="other.wav"))
        with pytest.raises(DuplicateEntryError):
            load_manifest(write_manifest(tmp_path, rows))

    def test_bad_json_reports_line(self, tmp_path):
        mpath = write_manifest(tmp_path, base_rows())
        with open(mpath, "a") as f:
            f.write("{not json\n")
        with pytest.raises(ParseError, match="line 4"):
            load_manifest(mpath)

    def test_missing_field_named(self, tmp_path):
        rows = base_rows()
        del rows[1]["session"]
        with pytest.raises(ParseError, match="session"):
            load_manifest(write_manifest(tmp_path, rows))

    def test_missing_rep_on_phrase(self, tmp_path):
        rows = base_rows()
        del rows[1]["rep"]
        with pytest.raises(ParseError, match="rep"):
            load_manifest(write_manifest(tmp_path, rows))

    def test_rep_on_aggressor_rejected(self, tmp_path):
        rows = base_rows()
        rows[2]["rep"] = 0
        with pytest.raises(ParseError, match="aggressor"):
            load_manifest(write_manifest(tmp_path, rows))

    def test_missing_audio_listed(self, tmp_path):
        mpath = write_manifest(tmp_path, base_rows())
        (tmp_path / "a1.wav").unlink()
        with pytest.raises(MissingAudioError, match="a1.wav"):
            load_manifest(mpath)

    def test_check_audio_can_be_skipped(self, tmp_path):
        mpath = write_manifest(tmp_path, base_rows())
        (tmp_path / "a1.wav").unlink()
        assert len(load_manifest(mpath, check_audio=False)) == 3


def pred(truth, predicted, speaker="s", condition="same_near", trial=0):
    return Prediction(speaker_id=speaker, truth=truth, predicted=predicted,
                      condition=condition, trial_index=trial, best_score=0.1)


class TestComputeMetrics:
    def test_confusion_fixture(self):
        rows = ([pred("A", "A")] * 3 + [pred("A", "B")]
                + [pred("B", "B")] * 2 + [pred("B", None)])
        report = compute_metrics(rows)
        r = report.row("s", "all")
        assert r.accuracy == pytest.approx(5 / 7)
        assert r.precision == pytest.approx(5 / 6)      # (1 + 2/3) / 2
        assert r.recall == pytest.approx(17 / 24)       # (3/4 + 2/3) / 2
        assert (r.correct, r.wrong, r.rejected) == (5, 1, 1)
        assert r.in_domain_total == 7
        top = report.row("ALL", "all")
        assert top.accuracy == pytest.approx(5 / 7)
        assert top.accuracy_std == 0.0

    def test_all_correct(self):
        rows = [pred("A", "A"), pred("B", "B"), pred("AGGRESSOR", None)]
        r = compute_metrics(rows).row("s", "all")
        assert (r.accuracy, r.precision, r.recall, r.fdr) == (1.0, 1.0, 1.0, 0.0)

    def test_all_rejected(self):
        rows = [pred("A", None), pred("B", None)]
        r = compute_metrics(rows).row("s", "all")
        assert r.accuracy == 0.0 and r.recall == 0.0
        assert math.isnan(r.precision)

    def test_aggressor_detection_rate(self):
        rows = [pred("A", "A"),
                pred("AGGRESSOR", "A"), pred("AGGRESSOR", None)]
        r = compute_metrics(rows).row("s", "all")
        assert r.fdr == pytest.approx(0.5)
        assert r.aggressor_total == 2 and r.aggressor_detected == 1

    def test_aggressor_false_hit_lowers_precision(self):
        rows = [pred("A", "A"), pred("A", "A"), pred("AGGRESSOR", "A")]
        r = compute_metrics(rows).row("s", "all")
        assert r.precision == pytest.approx(2 / 3)

    def test_only_aggressors_rejected(self):
        with pytest.raises(NoInDomainPredictionsError):
            compute_metrics([pred("AGGRESSOR", None)])

    def test_empty_rejected(self):
        with pytest.raises(NoInDomainPredictionsError):
            compute_metrics([])

    def test_speaker_averaging(self):
        rows = [pred("A", "A", speaker="p"), pred("A", None, speaker="q")]
        top = compute_metrics(rows).row("ALL", "all")
        assert top.accuracy == pytest.approx(0.5)
        assert top.accuracy_std == pytest.approx(0.5)


class TestSampler:
    def test_matches_reference_reimplementation(self):
        phrases = [f"p{i}" for i in range(12)]
        for trial in range(10):
            got = sample_phrases(phrases, 5, seed=99, trial_index=trial,
                                 speaker_id="spk7")
            rng = np.random.default_rng(
                [99, trial, zlib.crc32(b"spk7")])
            want = sorted(str(x) for x in
                          rng.choice(sorted(phrases), size=5, replace=False))
            assert got == want

    def test_same_seed_same_subset(self):
        phrases = [f"p{i}" for i in range(30)]
        a = sample_phrases(phrases, 10, 5, 2, "s")
        b = sample_phrases(phrases, 10, 5, 2, "s")
        assert a == b


@pytest.fixture(scope="module")
def rich_manifest(rich_corpus):
    return load_manifest(rich_corpus["manifest"])


@pytest.fixture(scope="module")
def engine():
    return Engine.spectral()


class TestRunTrial:
    def test_condition_buckets(self, rich_manifest, engine):
        spec = TrialSpec(train_session="s0", alpha=math.inf)
        preds = run_trial(rich_manifest, spec, engine)
        by_cond = {}
        for p in preds:
            by_cond.setdefault(p.condition, []).append(p)
        # 3 phrases: 1 held-out near rep + 3 aggressors in same_near,
        # 3 far reps each in same_far, 6 s1 reps each in other
        assert len(by_cond["same_near"]) == 3 + 3
        assert len(by_cond["same_far"]) == 9
        assert len(by_cond["other"]) == 18

    def test_deterministic(self, rich_manifest, engine):
        spec = TrialSpec(train_session="s0", alpha=1.25, seed=3)
        assert run_trial(rich_manifest, spec, engine) == \
            run_trial(rich_manifest, spec, engine)

    def test_alpha_inf_never_rejects(self, rich_manifest, engine):
        spec = TrialSpec(train_session="s0", alpha=math.inf)
        preds = run_trial(rich_manifest, spec, engine)
        assert all(p.predicted is not None for p in preds)

    def test_too_many_phrases_requested(self, rich_manifest, engine):
        spec = TrialSpec(train_session="s0", n_phrases=5)
        with pytest.raises(InsufficientDataError, match="spk0"):
            run_trial(rich_manifest, spec, engine)

    def test_not_enough_templates(self, rich_manifest, engine):
        spec = TrialSpec(train_session="s0", n_templates_per_phrase=4)
        with pytest.raises(InsufficientDataError, match="phrase"):
            run_trial(rich_manifest, spec, engine)

    def test_paired_utterance_sets_across_alpha(self, rich_manifest, engine):
        base = TrialSpec(train_session="s0", n_phrases=2, seed=5)
        keys = []
        for alpha in (0.5, 1.25, math.inf):
            spec = TrialSpec(train_session="s0", n_phrases=2, seed=5,
                             alpha=alpha)
            preds = run_trial(rich_manifest, spec, engine)
            keys.append([(p.speaker_id, p.truth, p.condition) for p in preds])
        assert keys[0] == keys[1] == keys[2]
        assert base.alpha != math.inf  # sanity on the fixture itself


class TestBenchmarkAndSweep:
    def test_counts_reconcile(self, rich_manifest, engine):
        report = run_benchmark(rich_manifest,
                               TrialSpec(train_session="s0"), engine)
        for r in report.rows:
            assert r.correct + r.wrong + r.rejected == r.in_domain_total
            # single trial: accuracy * total recovers the integer count
            assert r.accuracy * r.in_domain_total == pytest.approx(r.correct)

    def test_classification_mode_fdr_one(self, rich_manifest, engine):
        report = run_benchmark(rich_manifest,
                               TrialSpec(train_session="s0", alpha=math.inf),
                               engine)
        top = report.row("ALL", "all")
        assert top.rejected == 0
        assert top.fdr == 1.0

    def test_report_invariant_to_row_order(self, rich_corpus, engine, tmp_path):
        lines = open(rich_corpus["manifest"]).read().strip().split("\n")
        rng = np.random.default_rng(0)
        shuffled = [lines[i] for i in rng.permutation(len(lines))]
        alt = tmp_path / "shuffled.jsonl"
        alt.write_text("\n".join(shuffled) + "\n")
        import shutil
        shutil.copytree(f"{rich_corpus['root']}/audio", tmp_path / "audio")
        spec = TrialSpec(train_session="s0", n_phrases=2, seed=9)
        r1 = run_benchmark(load_manifest(rich_corpus["manifest"]), spec, engine)
        r2 = run_benchmark(load_manifest(alt), spec, engine)
        assert r1.csv_lines() == r2.csv_lines()

    def test_recall_monotone_in_alpha(self, rich_manifest, engine, tmp_path):
        results = sweep(rich_manifest, TrialSpec(train_session="s0"), engine,
                        axis="alpha", values=[0.5, 1.25, math.inf],
                        csv_path=tmp_path / "sweep.csv")
        recalls = [rep.row("ALL", "all").recall for _, rep in results]
        assert recalls == sorted(recalls)
        header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
        assert header.startswith("axis,value,speaker")

    def test_sweep_n_axis_and_chart(self, rich_manifest, engine, tmp_path):
        results = sweep(rich_manifest, TrialSpec(train_session="s0"), engine,
                        axis="n_phrases", values=[2, 3], n_trials=2,
                        csv_path=tmp_path / "n.csv",
                        chart_path=tmp_path / "n.png")
        assert [v for v, _ in results] == [2, 3]
        assert all(rep.params["n_phrases"] == v for v, rep in results)
        assert (tmp_path / "n.png").stat().st_size > 0

    def test_sweep_rejects_unknown_axis(self, rich_manifest, engine):
        with pytest.raises(ValueError):
            sweep(rich_manifest, TrialSpec(train_session="s0"), engine,
                  axis="band", values=[1])

    def test_snr_mixing_path(self, small_corpus, engine):
        manifest = load_manifest(small_corpus["manifest"])
        spec = TrialSpec(train_session="s0", n_phrases=3, alpha=math.inf,
                         snr_db=10.0, noise_path=small_corpus["noise"])
        report = run_benchmark(manifest, spec, engine)
        assert 0.0 <= report.row("ALL", "all").accuracy <= 1.0

    def test_trialspec_validation(self):
        with pytest.raises(ValueError):
            TrialSpec(train_session="s0", n_templates_per_phrase=1)
        with pytest.raises(ValueError):
            TrialSpec(train_session="s0", snr_db=5.0)
