"""Word-clip loading and training-sequence construction.

Training sequences look like [sil] [word] [sil] [word] [sil] with random
gap lengths; word/activity targets are derived from the concatenation
offsets, so the frame labels are exact by construction. Features follow
the runtime's recipe: 64 log-mel bands at 100 Hz, 25 ms Hann windows,
10 ms hop, additive 1e-6 floor.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

SAMPLE_RATE = 16000
WINDOW, HOP, N_FFT, N_MELS = 400, 160, 512, 64
LOG_FLOOR = 1e-6


class NoClipsError(RuntimeError):
    """A word directory held no usable WAV clips."""


def _read_wav(path) -> np.ndarray:
    rate, data = wavfile.read(path)
    if rate != SAMPLE_RATE:
        raise ValueError(f"{path}: expected {SAMPLE_RATE} Hz, got {rate}")
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported dtype {data.dtype}")
    if x.ndim == 2:
        x = x.mean(axis=1)
    return x


def load_word_clips(root) -> dict[str, list[np.ndarray]]:
    """One directory per word, each holding >= 1 WAV clip."""
    words = sorted(d for d in os.listdir(root)
                   if os.path.isdir(os.path.join(root, d)))
    if not words:
        raise NoClipsError(f"{root}: no word directories")
    out: dict[str, list[np.ndarray]] = {}
    for word in words:
        clips = sorted(f for f in os.listdir(os.path.join(root, word))
                       if f.endswith(".wav"))
        if not clips:
            raise NoClipsError(f"{root}/{word}: no WAV clips")
        out[word] = [_read_wav(os.path.join(root, word, f)) for f in clips]
    return out


def _mel_filterbank() -> np.ndarray:
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(z):
        return 700.0 * (10.0 ** (np.asarray(z, dtype=np.float64) / 2595.0) - 1.0)

    pts = mel_to_hz(np.linspace(hz_to_mel(60.0), hz_to_mel(7800.0), N_MELS + 2))
    freqs = np.arange(N_FFT // 2 + 1) * (SAMPLE_RATE / N_FFT)
    lo, ctr, hi = pts[:-2], pts[1:-1], pts[2:]
    up = (freqs[None, :] - lo[:, None]) / (ctr - lo)[:, None]
    down = (hi[:, None] - freqs[None, :]) / (hi - ctr)[:, None]
    return np.maximum(0.0, np.minimum(up, down))


_FB = _mel_filterbank()
_WIN = np.hanning(WINDOW + 1)[:-1]


def log_mel(x: np.ndarray) -> np.ndarray:
    """(t, 64) log-mel power; same recipe the runtime consumes."""
    t = (x.size - WINDOW) // HOP + 1
    idx = np.arange(WINDOW)[None, :] + HOP * np.arange(t)[:, None]
    spec = np.fft.rfft(x[idx] * _WIN[None, :], n=N_FFT, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    return np.log(power @ _FB.T + LOG_FLOOR)


def frames_for_samples(n: int) -> int:
    return (n - WINDOW) // HOP + 1


@dataclass(frozen=True)
class Example:
    mel: np.ndarray       # (t, 64)
    targets: np.ndarray   # (t, vocab + 1); last channel is speech activity
    spans: tuple          # (word_index, start_sample, end_sample) per word


def _mix_noise(x, rng, snr_range, noise_bank):
    if noise_bank:
        noise = noise_bank[int(rng.integers(len(noise_bank)))]
        reps = -(-x.size // noise.size)
        noise = np.tile(noise, reps)[:x.size]
    else:
        noise = rng.standard_normal(x.size)
    p_sig = float(np.mean(x ** 2))
    p_noise = float(np.mean(noise ** 2))
    if p_sig == 0.0 or p_noise == 0.0:
        return x
    snr = float(rng.uniform(*snr_range))
    scale = np.sqrt(p_sig / (p_noise * 10.0 ** (snr / 10.0)))
    return np.clip(x + scale * noise, -1.0, 1.0)


def build_example(config, rng: np.random.Generator,
                  clips: dict[str, list[np.ndarray]]) -> Example:
    """One [sil] [word] [sil] ... sequence with exact frame targets."""
    words = sorted(clips)
    vocab = len(words)
    lo, hi = config.words_per_example
    n_words = int(rng.integers(lo, hi + 1))

    def gap():
        return np.zeros(int(rng.uniform(*config.silence_gap_s) * SAMPLE_RATE))

    parts = [gap()]
    spans = []
    offset = parts[0].size
    for _ in range(n_words):
        w = int(rng.integers(vocab))
        bank = clips[words[w]]
        clip = bank[int(rng.integers(len(bank)))]
        spans.append((w, offset, offset + clip.size))
        parts.append(clip)
        offset += clip.size
        parts.append(gap())
        offset += parts[-1].size
    audio = np.concatenate(parts)
    if audio.size < WINDOW:
        audio = np.concatenate([audio, np.zeros(WINDOW - audio.size)])
    if config.mix_noise:
        audio = _mix_noise(audio, rng, config.snr_range_db,
                           getattr(config, "_noise_bank", None))
    mel = log_mel(audio)
    t = mel.shape[0]
    targets = np.zeros((t, vocab + 1))
    # frame j owns the 10 ms hop slot [j*HOP, (j+1)*HOP); label it active
    # when the word span covers the slot center, keeping the target span
    # within half a frame of the sample-exact boundary
    centers = HOP * np.arange(t) + HOP // 2
    for w, s0, s1 in spans:
        active = (centers >= s0) & (centers < s1)
        targets[active, w] = 1.0
        targets[active, vocab] = 1.0
    return Example(mel=mel, targets=targets, spans=tuple(spans))


def build_batch(config, rng: np.random.Generator,
                clips: dict[str, list[np.ndarray]]):
    """Stack batch_size examples, zero-padded to the longest sequence.

    Returns (mel (B, T, 64), targets (B, T, vocab+1), frame mask (B, T)).
    Padding frames carry zero targets and a zero mask.
    """
    examples = [build_example(config, rng, clips)
                for _ in range(config.batch_size)]
    t_max = max(e.mel.shape[0] for e in examples)
    vocab = len(clips)
    mel = np.full((len(examples), t_max, N_MELS), np.log(LOG_FLOOR))
    targets = np.zeros((len(examples), t_max, vocab + 1))
    mask = np.zeros((len(examples), t_max))
    for b, e in enumerate(examples):
        t = e.mel.shape[0]
        mel[b, :t] = e.mel
        targets[b, :t] = e.targets
        mask[b, :t] = 1.0
    return mel, targets, mask


def attach_noise_bank(config, noise_dir) -> None:
    """Preload noise WAVs once; referenced by every build_example call."""
    bank = []
    if noise_dir:
        for f in sorted(os.listdir(noise_dir)):
            if f.endswith(".wav"):
                bank.append(_read_wav(os.path.join(noise_dir, f)))
    config._noise_bank = bank
