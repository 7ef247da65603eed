"""Synthetic multi-tone phrase corpus for end-to-end benchmarks.

Each "phrase" is a fixed sequence of two-tone segments drawn from a
coarse frequency grid; renditions re-render the sequence with random
per-segment time warp, random phases, and amplitude jitter, so templates
of one phrase agree in structure but not in timing. Aggressor clips use
off-grid frequencies and a different rhythm. All audio is written as
16 kHz mono PCM WAV plus a JSONL manifest the eval harness consumes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .audio import SAMPLE_RATE

TONE_GRID_HZ = np.arange(300.0, 3900.0, 250.0)   # 15 slots
AGGRESSOR_OFFSET_HZ = 125.0


@dataclass(frozen=True)
class PhraseSpec:
    """Segment list: (freq_a, freq_b, nominal duration seconds)."""

    phrase_id: str
    segments: tuple[tuple[float, float, float], ...]


def make_phrase_bank(n_phrases: int, rng: np.random.Generator) -> list[PhraseSpec]:
    bank: list[PhraseSpec] = []
    signatures: set[tuple] = set()
    while len(bank) < n_phrases:
        n_seg = int(rng.integers(3, 6))
        segs = []
        for _ in range(n_seg):
            a, b = rng.choice(len(TONE_GRID_HZ), size=2, replace=False)
            dur = float(rng.uniform(0.14, 0.26))
            segs.append((float(TONE_GRID_HZ[a]), float(TONE_GRID_HZ[b]), dur))
        signature = tuple((s[0], s[1]) for s in segs)
        if signature in signatures:
            continue
        signatures.add(signature)
        bank.append(PhraseSpec(phrase_id=f"phrase{len(bank):02d}",
                               segments=tuple(segs)))
    return bank


def _tone_segment(freqs, dur_s: float, rng: np.random.Generator) -> np.ndarray:
    n = max(1, int(round(dur_s * SAMPLE_RATE)))
    t = np.arange(n) / SAMPLE_RATE
    seg = np.zeros(n)
    for f in freqs:
        seg += np.sin(2.0 * np.pi * f * t + rng.uniform(0.0, 2.0 * np.pi))
    seg /= len(freqs)
    ramp = min(n // 2, int(0.010 * SAMPLE_RATE))
    if ramp > 0:
        env = np.ones(n)
        env[:ramp] = np.linspace(0.0, 1.0, ramp)
        env[-ramp:] = np.linspace(1.0, 0.0, ramp)
        seg *= env
    return seg


def render_phrase(spec: PhraseSpec, rng: np.random.Generator,
                  warp: float = 0.2) -> np.ndarray:
    """One rendition; each segment's duration jitters by +-warp."""
    gain = float(rng.uniform(0.25, 0.35))
    parts = [np.zeros(int(rng.uniform(0.12, 0.18) * SAMPLE_RATE))]
    for k, (fa, fb, dur) in enumerate(spec.segments):
        stretched = dur * (1.0 + rng.uniform(-warp, warp))
        parts.append(gain * _tone_segment((fa, fb), stretched, rng))
        if k != len(spec.segments) - 1:
            parts.append(np.zeros(int(rng.uniform(0.04, 0.09) * SAMPLE_RATE)))
    parts.append(np.zeros(int(rng.uniform(0.12, 0.18) * SAMPLE_RATE)))
    return np.concatenate(parts)


def render_aggressor(rng: np.random.Generator) -> np.ndarray:
    """Out-of-set babble with off-grid tones and a looser rhythm."""
    gain = float(rng.uniform(0.2, 0.3))
    parts = [np.zeros(int(0.15 * SAMPLE_RATE))]
    for _ in range(int(rng.integers(8, 13))):
        freqs = rng.choice(TONE_GRID_HZ, size=2, replace=False) + AGGRESSOR_OFFSET_HZ
        parts.append(gain * _tone_segment(freqs, float(rng.uniform(0.08, 0.35)), rng))
        parts.append(np.zeros(int(rng.uniform(0.02, 0.12) * SAMPLE_RATE)))
    parts.append(np.zeros(int(0.15 * SAMPLE_RATE)))
    return np.concatenate(parts)


def write_wav(path, samples: np.ndarray) -> None:
    data = np.clip(samples, -1.0, 1.0)
    wavfile.write(path, SAMPLE_RATE, (data * 32767.0).astype(np.int16))


def build_corpus(root, n_phrases: int = 10, n_reps: int = 5,
                 n_aggressors: int = 6, seed: int = 0,
                 warp: float = 0.2) -> tuple[str, str]:
    """Write WAVs + manifest under root; returns (manifest, noise) paths."""
    rng = np.random.default_rng(seed)
    audio_dir = os.path.join(root, "audio")
    os.makedirs(audio_dir, exist_ok=True)
    bank = make_phrase_bank(n_phrases, rng)
    records = []
    for spec in bank:
        for rep in range(n_reps):
            rel = f"audio/{spec.phrase_id}_rep{rep}.wav"
            write_wav(os.path.join(root, rel), render_phrase(spec, rng, warp))
            records.append({"path": rel, "speaker": "synth",
                            "phrase": spec.phrase_id, "session": "s0",
                            "mic": "unspecified", "rep": rep})
    for k in range(n_aggressors):
        rel = f"audio/aggressor{k}.wav"
        write_wav(os.path.join(root, rel), render_aggressor(rng))
        records.append({"path": rel, "speaker": "synth",
                        "phrase": "AGGRESSOR", "session": "s0",
                        "mic": "unspecified"})
    noise_path = os.path.join(root, "noise.wav")
    write_wav(noise_path, 0.5 * rng.standard_normal(5 * SAMPLE_RATE).clip(-2, 2) / 2)
    manifest_path = os.path.join(root, "manifest.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    return manifest_path, noise_path
