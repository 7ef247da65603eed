"""WAV decoding, log-mel features, and SNR-controlled noise mixing.

All clips are canonicalized to 16 kHz mono float in [-1, 1] at load time.
Features are 64-band log-mel at 100 Hz (25 ms Hann window, 10 ms hop).
Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import (
    EmptyAudioError,
    SilentNoiseError,
    SilentSpeechError,
    TooShortError,
    UnsupportedFormatError,
)

log = logging.getLogger(__name__)

SAMPLE_RATE = 16000
FRAME_RATE = 100
WINDOW_SAMPLES = 400    # 25 ms
HOP_SAMPLES = 160       # 10 ms -> 100 Hz
N_FFT = 512             # window zero-padded; 31.25 Hz bin spacing
N_MELS = 64
MEL_FMIN = 60.0
MEL_FMAX = 7800.0
LOG_FLOOR = 1e-6
ACTIVITY_GATE_DBFS = -60.0


@dataclass(frozen=True)
class AudioClip:
    """Mono PCM samples in [-1, 1] with their sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if self.samples.size == 0:
            raise EmptyAudioError("clip has zero samples")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"bad sample rate {self.sample_rate_hz}")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class MelSpectrogram:
    """t x 64 natural-log mel energies at 100 Hz."""

    frames: np.ndarray
    frame_rate_hz: int = FRAME_RATE

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[1] != N_MELS:
            raise ValueError(f"expected t x {N_MELS} frames, got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise ValueError("empty spectrogram")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def _pcm_to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise UnsupportedFormatError(f"unsupported sample dtype {data.dtype}")


def load_audio(path) -> AudioClip:
    """Decode a PCM WAV to a mono 16 kHz clip scaled to [-1, 1].

    Channels are averaged; other sample rates are resampled with a
    polyphase filter. Raises UnsupportedFormatError for non-PCM codecs
    and EmptyAudioError for zero-length files.
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as e:
        raise UnsupportedFormatError(str(e)) from e
    if data.size == 0:
        raise EmptyAudioError(f"{path}: no samples")
    x = _pcm_to_float(data)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if rate != SAMPLE_RATE:
        ratio = Fraction(SAMPLE_RATE, int(rate))
        x = resample_poly(x, ratio.numerator, ratio.denominator)
        if x.size == 0:
            raise EmptyAudioError(f"{path}: resampled to zero samples")
    return AudioClip(samples=np.ascontiguousarray(x), sample_rate_hz=SAMPLE_RATE)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int = N_MELS,
                           fmin: float = MEL_FMIN,
                           fmax: float = MEL_FMAX) -> np.ndarray:
    """Center frequency in Hz of each triangular mel filter."""
    pts = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    return pts[1:-1]


def _build_mel_filterbank(n_fft: int, sr: int, n_mels: int,
                          fmin: float, fmax: float) -> np.ndarray:
    """[n_mels, n_fft//2 + 1] triangular filters, peak 1.0."""
    freqs = np.arange(n_fft // 2 + 1) * (sr / n_fft)
    pts = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    lo, center, hi = pts[:-2], pts[1:-1], pts[2:]
    up = (freqs[None, :] - lo[:, None]) / (center - lo)[:, None]
    down = (hi[:, None] - freqs[None, :]) / (hi - center)[:, None]
    return np.maximum(0.0, np.minimum(up, down))


_MEL_FB = _build_mel_filterbank(N_FFT, SAMPLE_RATE, N_MELS, MEL_FMIN, MEL_FMAX)
_HANN = np.hanning(WINDOW_SAMPLES + 1)[:-1]  # periodic Hann


def num_mel_frames(num_samples: int) -> int:
    return (num_samples - WINDOW_SAMPLES) // HOP_SAMPLES + 1


def compute_log_mel(clip: AudioClip) -> MelSpectrogram:
    """64-band log-mel power at 100 Hz.

    t = floor((n - 400) / 160) + 1 frames; each frame is a 25 ms Hann
    window zero-padded to 512 points; mel triangles span 60-7800 Hz;
    log is natural with an additive 1e-6 floor.
    """
    if clip.sample_rate_hz != SAMPLE_RATE:
        raise ValueError(f"clip must be at {SAMPLE_RATE} Hz")
    x = clip.samples
    if x.size < WINDOW_SAMPLES:
        raise TooShortError(
            f"clip has {x.size} samples; needs at least {WINDOW_SAMPLES}")
    t = num_mel_frames(x.size)
    idx = np.arange(WINDOW_SAMPLES)[None, :] + HOP_SAMPLES * np.arange(t)[:, None]
    frames = x[idx] * _HANN[None, :]
    spec = np.fft.rfft(frames, n=N_FFT, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    mel = power @ _MEL_FB.T
    return MelSpectrogram(frames=np.log(mel + LOG_FLOOR))


def _frame_rms(x: np.ndarray) -> np.ndarray:
    """RMS per 25 ms / 10 ms analysis frame; whole clip if shorter."""
    if x.size < WINDOW_SAMPLES:
        return np.sqrt(np.array([np.mean(x ** 2)]))
    t = num_mel_frames(x.size)
    idx = np.arange(WINDOW_SAMPLES)[None, :] + HOP_SAMPLES * np.arange(t)[:, None]
    return np.sqrt(np.mean(x[idx] ** 2, axis=1))


def _active_sample_mask(x: np.ndarray, gate_dbfs: float) -> np.ndarray:
    """Samples covered by analysis frames whose RMS clears the gate."""
    gate = 10.0 ** (gate_dbfs / 20.0)
    rms = _frame_rms(x)
    mask = np.zeros(x.size, dtype=bool)
    if x.size < WINDOW_SAMPLES:
        mask[:] = rms[0] > gate
        return mask
    for j in np.nonzero(rms > gate)[0]:
        mask[j * HOP_SAMPLES: j * HOP_SAMPLES + WINDOW_SAMPLES] = True
    return mask


def mix_noise_at_snr(speech: AudioClip, noise: AudioClip, snr_db: float) -> AudioClip:
    """Add noise scaled so the speech-active region sits at snr_db.

    Noise is looped/truncated to the speech length. Powers are mean
    squared amplitude over speech frames above a -60 dBFS gate, so
    leading/trailing silence does not dilute the target ratio. snr_db
    of +inf returns the speech unchanged. Output is clipped to [-1, 1];
    clipping is reported through a warning log.
    """
    if speech.sample_rate_hz != SAMPLE_RATE or noise.sample_rate_hz != SAMPLE_RATE:
        raise ValueError(f"both clips must be at {SAMPLE_RATE} Hz")
    if math.isinf(snr_db) and snr_db > 0:
        return speech
    n = speech.samples.size
    reps = -(-n // noise.samples.size)
    looped = np.tile(noise.samples, reps)[:n]
    if np.sqrt(np.mean(looped ** 2)) == 0.0:
        raise SilentNoiseError("noise clip has zero RMS")
    mask = _active_sample_mask(speech.samples, ACTIVITY_GATE_DBFS)
    if not mask.any():
        raise SilentSpeechError("speech clip has no active frames above the gate")
    p_speech = np.mean(speech.samples[mask] ** 2)
    p_noise = np.mean(looped[mask] ** 2)
    if p_noise == 0.0:
        raise SilentNoiseError("noise is silent over the speech-active region")
    scale = np.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))
    mixed = speech.samples + scale * looped
    n_clipped = int(np.count_nonzero((mixed > 1.0) | (mixed < -1.0)))
    if n_clipped:
        log.warning("mix_noise_at_snr: clipped %d of %d samples", n_clipped, n)
        mixed = np.clip(mixed, -1.0, 1.0)
    return AudioClip(samples=mixed, sample_rate_hz=SAMPLE_RATE)
