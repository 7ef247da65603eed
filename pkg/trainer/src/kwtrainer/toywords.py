"""Synthetic spoken-word stand-ins for desk-scale training runs.

Each toy word is a fixed two-tone chord with its own amplitude-
modulation rate; clips jitter duration, pitch, and level so the net has
something to generalize over. Clips are written one directory per word,
which is the same layout a real word corpus would use.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.io import wavfile

SAMPLE_RATE = 16000
WORD_TONE_GRID_HZ = np.arange(350.0, 3700.0, 300.0)


def word_signature(word_index: int, rng: np.random.Generator):
    a, b = rng.choice(len(WORD_TONE_GRID_HZ), size=2, replace=False)
    am_rate = float(rng.uniform(4.0, 14.0))
    return (float(WORD_TONE_GRID_HZ[a]), float(WORD_TONE_GRID_HZ[b]), am_rate)


def render_word(signature, rng: np.random.Generator) -> np.ndarray:
    fa, fb, am = signature
    dur = float(rng.uniform(0.25, 0.4))
    n = int(dur * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    jitter = 1.0 + rng.uniform(-0.02, 0.02)
    x = (np.sin(2 * np.pi * fa * jitter * t + rng.uniform(0, 2 * np.pi))
         + np.sin(2 * np.pi * fb * jitter * t + rng.uniform(0, 2 * np.pi)))
    x *= 0.5 * (1.0 + 0.6 * np.sin(2 * np.pi * am * t))
    ramp = int(0.01 * SAMPLE_RATE)
    env = np.ones(n)
    env[:ramp] = np.linspace(0, 1, ramp)
    env[-ramp:] = np.linspace(1, 0, ramp)
    return (float(rng.uniform(0.25, 0.4)) * x * env / 2.0)


def build_toy_corpus(root, n_words: int = 10, clips_per_word: int = 16,
                     seed: int = 0) -> list[str]:
    """Write WAV clips under root/<word>/clip###.wav; returns word names."""
    rng = np.random.default_rng(seed)
    words = []
    for k in range(n_words):
        name = f"word{k:02d}"
        sig = word_signature(k, rng)
        word_dir = os.path.join(root, name)
        os.makedirs(word_dir, exist_ok=True)
        for j in range(clips_per_word):
            clip = np.clip(render_word(sig, rng), -1.0, 1.0)
            wavfile.write(os.path.join(word_dir, f"clip{j:03d}.wav"),
                          SAMPLE_RATE, (clip * 32767.0).astype(np.int16))
        words.append(name)
    return words
