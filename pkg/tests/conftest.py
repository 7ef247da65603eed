import json
import os

import numpy as np
import pytest
from scipy.io import wavfile

from phrasematch.audio import SAMPLE_RATE
from phrasematch.synthetic import build_corpus, make_phrase_bank, render_phrase


def write_wav(path, samples, rate=SAMPLE_RATE, dtype=np.int16):
    samples = np.asarray(samples)
    if dtype == np.int16:
        data = (np.clip(samples, -1.0, 1.0) * 32767.0).astype(np.int16)
    elif dtype == np.float32:
        data = samples.astype(np.float32)
    else:
        data = samples.astype(dtype)
    wavfile.write(path, rate, data)
    return str(path)


@pytest.fixture
def wav_factory(tmp_path):
    counter = [0]

    def make(samples, rate=SAMPLE_RATE, dtype=np.int16, name=None):
        counter[0] += 1
        path = tmp_path / (name or f"clip{counter[0]}.wav")
        return write_wav(path, samples, rate, dtype)

    return make


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """10 synthetic phrases x 5 reps, one session, plus aggressors."""
    root = tmp_path_factory.mktemp("corpus10")
    manifest, noise = build_corpus(str(root), n_phrases=10, n_reps=5,
                                   n_aggressors=6, seed=20250810)
    return {"root": str(root), "manifest": manifest, "noise": noise}


@pytest.fixture(scope="session")
def rich_corpus(tmp_path_factory):
    """3 phrases across 2 sessions and near/far mics, for condition tests."""
    root = tmp_path_factory.mktemp("rich_corpus")
    audio = root / "audio"
    audio.mkdir()
    rng = np.random.default_rng(77)
    bank = make_phrase_bank(3, rng)
    records = []
    for spec in bank:
        for session in ("s0", "s1"):
            for mic in ("near", "far"):
                for rep in range(3):
                    rel = f"audio/{spec.phrase_id}_{session}_{mic}_{rep}.wav"
                    write_wav(root / rel, render_phrase(spec, rng))
                    records.append({"path": rel, "speaker": "spk0",
                                    "phrase": spec.phrase_id,
                                    "session": session, "mic": mic,
                                    "rep": rep})
    from phrasematch.synthetic import render_aggressor
    for k in range(3):
        rel = f"audio/agg{k}.wav"
        write_wav(root / rel, render_aggressor(rng))
        records.append({"path": rel, "speaker": "spk0", "phrase": "AGGRESSOR",
                        "session": "s0", "mic": "near"})
    manifest = root / "manifest.jsonl"
    with open(manifest, "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    return {"root": str(root), "manifest": str(manifest)}


@pytest.fixture(scope="session")
def big_corpus(tmp_path_factory):
    """50 phrases x 5 reps for the varying-n direction check."""
    root = tmp_path_factory.mktemp("corpus50")
    manifest, noise = build_corpus(str(root), n_phrases=50, n_reps=5,
                                   n_aggressors=4, seed=908070)
    return {"root": str(root), "manifest": manifest, "noise": noise}
